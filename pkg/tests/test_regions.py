import numpy as np
import pytest

from neuralparc.hpoly import Hyperrectangle, chebyshev_center
from neuralparc.network import ReluNetwork, init_network
from neuralparc.regions import (
    enumerate_all,
    essential_constraints,
    neighbor,
    region_at,
    walk_regions,
)


def single_relu():
    return ReluNetwork([[[1.0]], [[1.0]]], [[0.0], [0.0]])


def random_net(seed, dim, widths, out=1, bias_scale=0.3):
    net = init_network(dim, widths, out, seed)
    rng = np.random.default_rng(seed + 991)
    biases = [bias_scale * rng.standard_normal(b.shape) for b in net.biases]
    return ReluNetwork(list(net.weights), biases)


def pack(pattern):
    bits = [b for layer in pattern for b in layer]
    return sum(int(b) << i for i, b in enumerate(bits))


class TestRegionAt:
    def test_active_side(self):
        dom = Hyperrectangle([-2.0], [2.0])
        r = region_at(single_relu(), [1.0], dom)
        assert r.C[0, 0] == 1.0 and r.d[0] == 0.0
        assert r.region.contains([0.5]) and not r.region.contains([-0.5])
        assert r.region.contains([2.0]) and not r.region.contains([2.5])

    def test_inactive_side(self):
        dom = Hyperrectangle([-2.0], [2.0])
        r = region_at(single_relu(), [-1.0], dom)
        assert r.C[0, 0] == 0.0 and r.d[0] == 0.0
        assert r.region.contains([-1.5]) and not r.region.contains([0.5])

    def test_seed_always_inside(self):
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        net = random_net(0, 2, [4, 4])
        rng = np.random.default_rng(1)
        for _ in range(30):
            x = rng.uniform(-2, 2, 2)
            r = region_at(net, x, dom)
            assert r.region.contains(x)

    def test_seed_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            region_at(single_relu(), [3.0], Hyperrectangle([-2.0], [2.0]))

    def test_map_matches_finite_differences(self):
        net = random_net(2, 2, [2, 2])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 10:
            x = rng.uniform(-1.5, 1.5, 2)
            r = region_at(net, x, dom)
            _, radius = chebyshev_center(r.region)
            if radius < 1e-3:
                continue
            h = 1e-6
            grad = np.zeros((net.output_dim, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                grad[:, j] = (net.forward(x + e) - net.forward(x - e)) / (2 * h)
            if net.activation_pattern(x + [h, h]) != r.pattern:
                continue  # too close to a boundary for clean differences
            assert np.abs(grad - r.C).max() <= 1e-5
            checked += 1

    def test_forward_equals_map_on_region_samples(self):
        net = random_net(4, 2, [5, 5])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        rng = np.random.default_rng(5)
        xs = rng.uniform(-2, 2, size=(1000, 2))
        for x in xs[:50]:
            r = region_at(net, x, dom)
            members = xs[r.region.contains(xs)]
            want = net.forward(members)
            got = members @ r.C.T + r.d
            assert np.abs(want - got).max() <= 1e-6


class TestEssentialConstraints:
    def test_single_hyperplane_essential(self):
        dom = Hyperrectangle([-2.0], [2.0])
        r = region_at(single_relu(), [1.0], dom)
        rows = essential_constraints(r)
        assert rows == [r.n_domain_rows]

    def test_interior_cell_has_none(self):
        # hyperplane far outside the domain: its constraint never binds
        net = ReluNetwork([[[1.0]], [[1.0]]], [[10.0], [0.0]])
        dom = Hyperrectangle([-2.0], [2.0])
        r = region_at(net, [0.0], dom)
        assert essential_constraints(r) == []

    def test_redundant_rows_removable(self):
        net = random_net(6, 2, [6])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        rng = np.random.default_rng(7)
        r = region_at(net, rng.uniform(-1, 1, 2), dom)
        essential = set(essential_constraints(r))
        redundant = [i for i in r.neuron_row_range if i not in essential]
        pts = rng.uniform(-2, 2, size=(10_000, 2))
        keep = [i for i in range(r.region.n_rows) if i not in redundant]
        slim_membership = (pts @ r.region.A[keep].T <= r.region.b[keep]).all(axis=1)
        assert np.array_equal(slim_membership, r.region.contains(pts, tol=0.0))


class TestNeighbor:
    def test_one_dim_flip(self):
        dom = Hyperrectangle([-2.0], [2.0])
        net = single_relu()
        r = region_at(net, [1.0], dom)
        row = essential_constraints(r)[0]
        nb = neighbor(net, r, row)
        assert nb is not None
        assert nb.region.contains([-1.0]) and not nb.region.contains([1.0])
        assert nb.C[0, 0] == 0.0

    def test_domain_face_gives_none(self):
        dom = Hyperrectangle([-2.0], [2.0])
        r = region_at(single_relu(), [1.0], dom)
        assert neighbor(single_relu(), r, 0) is None  # rows 0..1 are domain faces

    def test_map_continuity_on_shared_facet(self):
        net = random_net(8, 2, [5, 4])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        rng = np.random.default_rng(9)
        checked = 0
        tries = 0
        while checked < 10 and tries < 200:
            tries += 1
            r = region_at(net, rng.uniform(-2, 2, 2), dom)
            rows = essential_constraints(r)
            if not rows:
                continue
            row = rows[0]
            nb = neighbor(net, r, row)
            if nb is None:
                continue
            # facet midpoint: solve for a point on the shared hyperplane
            from neuralparc.regions import _facet_interior_point

            point = _facet_interior_point(r, row)
            if point is None:
                continue
            va = r.affine_value(point)
            vb = nb.affine_value(point)
            assert np.abs(va - vb).max() <= 1e-6
            checked += 1
        assert checked >= 5


class TestEnumerateAll:
    def test_two_regions_for_single_relu(self):
        res = enumerate_all(single_relu(), Hyperrectangle([-2.0], [2.0]), [1.0])
        assert len(res.regions) == 2 and res.complete

    def test_affine_net_single_region(self):
        net = ReluNetwork([np.array([[1.0, 2.0]])], [np.array([0.5])])
        res = enumerate_all(net, Hyperrectangle([-1.0, -1.0], [1.0, 1.0]), [0.0, 0.0])
        assert len(res.regions) == 1 and res.complete
        assert np.array_equal(res.regions[0].C, [[1.0, 2.0]])

    def test_no_duplicate_patterns(self):
        net = random_net(10, 2, [6, 4])
        res = enumerate_all(net, Hyperrectangle([-2.0, -2.0], [2.0, 2.0]), [0.1, 0.2])
        keys = [pack(r.pattern) for r in res.regions]
        assert len(keys) == len(set(keys))

    def test_indices_follow_discovery_order(self):
        net = random_net(10, 2, [6, 4])
        res = enumerate_all(net, Hyperrectangle([-2.0, -2.0], [2.0, 2.0]), [0.1, 0.2])
        assert [r.index for r in res.regions] == list(range(len(res.regions)))

    def test_early_stop_flagged_incomplete(self):
        net = random_net(11, 2, [6, 6])
        res = enumerate_all(
            net, Hyperrectangle([-2.0, -2.0], [2.0, 2.0]), [0.0, 0.0],
            stop=lambda r: r.index >= 3,
        )
        assert not res.complete and len(res.regions) == 4

    def test_region_cap_flagged_incomplete(self):
        net = random_net(12, 2, [8, 8])
        res = enumerate_all(net, Hyperrectangle([-2.0, -2.0], [2.0, 2.0]), [0.0, 0.0], max_regions=5)
        assert not res.complete and len(res.regions) == 5

    def test_grid_pattern_superset_and_exactness(self):
        # dense-grid oracle: every pattern observed on a 400x400 grid must
        # be enumerated, and the maps must reproduce forward exactly
        net = random_net(13, 2, [4, 4, 4])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        res = enumerate_all(net, dom, [0.123, -0.345])
        g = np.linspace(-2, 2, 400)
        pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
        grid_keys = set(np.unique(net.batch_patterns_packed(pts)).tolist())
        enum_keys = set(pack(r.pattern) for r in res.regions)
        assert len(res.regions) >= len(grid_keys)
        assert grid_keys <= enum_keys

    def test_tessellation_coverage(self):
        net = random_net(14, 2, [6, 5])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        res = enumerate_all(net, dom, [0.0, 0.0])
        pts = np.random.default_rng(15).uniform(-2, 2, size=(10_000, 2))
        covered = np.zeros(len(pts), dtype=bool)
        exact = np.zeros(len(pts), dtype=bool)
        want = net.forward(pts)
        for r in res.regions:
            inside = r.region.contains(pts)
            covered |= inside
            got = pts[inside] @ r.C.T + r.d
            exact[inside] |= (np.abs(got - want[inside]).max(axis=1) <= 1e-6)
        assert covered.all()
        assert exact[covered].all()

    def test_walk_is_deterministic(self):
        net = random_net(16, 2, [5, 5])
        dom = Hyperrectangle([-2.0, -2.0], [2.0, 2.0])
        a = [pack(r.pattern) for r in walk_regions(net, dom, np.array([0.3, -0.2]))]
        b = [pack(r.pattern) for r in walk_regions(net, dom, np.array([0.3, -0.2]))]
        assert a == b
