import json

import numpy as np
import pytest

from neuralparc.hpoly import (
    HPolytope,
    Hyperrectangle,
    bounding_box,
    buffer_agent_body,
    cartesian_product,
    chebyshev_center,
    circumscribed_octagon,
    intersect,
    minkowski_buffer,
    pontryagin_diff,
    preimage,
    reduce,
    sample_uniform,
    support,
)

from helpers import brute_force_vertices, random_bounded_hpoly


def unit_box(dim):
    return Hyperrectangle(-np.ones(dim), np.ones(dim))


class TestHPolytope:
    def test_row_count_validation(self):
        with pytest.raises(ValueError):
            HPolytope(np.eye(2), np.ones(3))

    def test_json_round_trip_bit_exact(self):
        rng = np.random.default_rng(0)
        p = HPolytope(rng.standard_normal((5, 3)), rng.standard_normal(5))
        q = HPolytope.from_dict(json.loads(json.dumps(p.to_dict())))
        assert np.array_equal(p.A, q.A)
        assert np.array_equal(p.b, q.b)

    def test_box_json_form(self):
        d = {"box": {"lower": [0.0, 0.0], "upper": [1.0, 2.0]}}
        p = HPolytope.from_dict(d)
        assert p.contains([0.5, 1.0]) and not p.contains([1.5, 1.0])

    def test_immutability(self):
        p = unit_box(2).as_hpolytope()
        with pytest.raises((ValueError, AttributeError)):
            p.A[0, 0] = 5.0

    def test_is_empty(self):
        assert not unit_box(2).as_hpolytope().is_empty()
        assert HPolytope([[1.0], [-1.0]], [0.0, -1.0]).is_empty()

    def test_is_empty_matches_vertex_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            A = rng.standard_normal((8, 3))
            b = rng.uniform(-0.3, 1.0, 8)
            verts = brute_force_vertices(A, b)
            p = HPolytope(A, b)
            if len(verts) > 0:
                assert not p.is_empty()
            # no vertices can also mean unbounded-nonempty, so only the
            # one-sided check is an oracle here


class TestHyperrectangle:
    def test_ordering_validation(self):
        with pytest.raises(ValueError):
            Hyperrectangle([1.0], [0.0])

    def test_as_hpolytope_layout(self):
        box = Hyperrectangle([0.0, -1.0], [2.0, 3.0])
        p = box.as_hpolytope()
        assert p.n_rows == 4
        assert np.array_equal(p.b, [2.0, 3.0, 0.0, 1.0])

    def test_support_closed_form_matches_lp(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            lo = rng.uniform(-2, 0, 3)
            hi = lo + rng.uniform(0, 2, 3)
            box = Hyperrectangle(lo, hi)
            a = rng.standard_normal(3)
            assert abs(box.support(a) - support(box.as_hpolytope(), a)) <= 1e-9


class TestIntersect:
    def test_boxes(self):
        p = unit_box(2).as_hpolytope()
        q = Hyperrectangle([0.0, 0.0], [2.0, 2.0]).as_hpolytope()
        both = intersect(p, q)
        assert both.n_rows == p.n_rows + q.n_rows
        bb = bounding_box(both)
        assert np.allclose(bb.lower, [0, 0]) and np.allclose(bb.upper, [1, 1])

    def test_self_intersection_same_set(self):
        p = unit_box(2).as_hpolytope()
        pp = intersect(p, p)
        pts = np.random.default_rng(0).uniform(-2, 2, size=(1000, 2))
        assert np.array_equal(p.contains(pts), pp.contains(pts))

    def test_membership_is_conjunction(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            A1, b1 = random_bounded_hpoly(rng, 3)
            A2, b2 = random_bounded_hpoly(rng, 3)
            p, q = HPolytope(A1, b1), HPolytope(A2, b2)
            both = intersect(p, q)
            pts = rng.uniform(-2.5, 2.5, size=(10_000, 3))
            want = p.contains(pts) & q.contains(pts)
            assert np.array_equal(both.contains(pts), want)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            intersect(unit_box(2).as_hpolytope(), unit_box(3).as_hpolytope())


class TestCartesianProduct:
    def test_unit_square_from_intervals(self):
        seg = Hyperrectangle([0.0], [1.0]).as_hpolytope()
        square = cartesian_product(seg, seg)
        assert square.dim == 2
        assert square.contains([0.5, 0.5]) and not square.contains([0.5, 1.5])

    def test_with_empty_factor(self):
        empty = HPolytope([[1.0], [-1.0]], [0.0, -1.0])
        prod = cartesian_product(empty, unit_box(2).as_hpolytope())
        assert prod.is_empty()

    def test_block_layout_and_rows(self):
        p = unit_box(2).as_hpolytope()
        q = HPolytope(np.array([[1.0, 1.0]]), [1.0])
        prod = cartesian_product(p, q)
        assert prod.n_rows == p.n_rows + q.n_rows
        assert np.array_equal(prod.A[: p.n_rows, 2:], np.zeros((4, 2)))
        assert np.array_equal(prod.A[p.n_rows :, :2], np.zeros((1, 2)))

    def test_membership_is_pairwise(self):
        rng = np.random.default_rng(6)
        A1, b1 = random_bounded_hpoly(rng, 2)
        A2, b2 = random_bounded_hpoly(rng, 2)
        p, q = HPolytope(A1, b1), HPolytope(A2, b2)
        prod = cartesian_product(p, q)
        pts = rng.uniform(-2.5, 2.5, size=(10_000, 4))
        want = p.contains(pts[:, :2]) & q.contains(pts[:, 2:])
        assert np.array_equal(prod.contains(pts), want)


class TestSupport:
    def test_unit_box_axis(self):
        assert abs(support(unit_box(2).as_hpolytope(), [1.0, 0.0]) - 1.0) <= 1e-9

    def test_unit_box_diagonal(self):
        assert abs(support(unit_box(2).as_hpolytope(), [1.0, 1.0]) - 2.0) <= 1e-9

    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            A, b = random_bounded_hpoly(rng, 3)
            verts = brute_force_vertices(A, b)
            assert len(verts) > 0
            a = rng.standard_normal(3)
            want = float((verts @ a).max())
            assert abs(support(HPolytope(A, b), a) - want) <= 1e-7

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            support(HPolytope([[1.0], [-1.0]], [0.0, -1.0]), [1.0])

    def test_unbounded_reported(self):
        assert support(HPolytope([[-1.0]], [0.0]), [1.0]) == float("inf")


class TestPontryaginDiff:
    def test_box_shrink(self):
        p = unit_box(2).as_hpolytope()
        e = Hyperrectangle([-0.5, -0.5], [0.5, 0.5])
        out = pontryagin_diff(p, e)
        assert np.allclose(out.b, 0.5)

    def test_zero_box_is_identity(self):
        rng = np.random.default_rng(8)
        A, b = random_bounded_hpoly(rng, 2)
        p = HPolytope(A, b)
        out = pontryagin_diff(p, Hyperrectangle([0.0, 0.0], [0.0, 0.0]))
        assert np.array_equal(out.b, p.b)

    def test_shifted_points_stay_inside(self):
        # corner-sampling oracle: x in (P - E), corner e of E => x + e in P
        rng = np.random.default_rng(9)
        for _ in range(10):
            A, b = random_bounded_hpoly(rng, 2, n_extra=3)
            p = HPolytope(A, b)
            lo = rng.uniform(-0.4, 0.0, 2)
            hi = rng.uniform(0.0, 0.4, 2)
            e = Hyperrectangle(lo, hi)
            diff = pontryagin_diff(p, e)
            pts = rng.uniform(-2.5, 2.5, size=(10_000, 2))
            pts = pts[diff.contains(pts)]
            corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
            for corner in corners:
                assert p.contains(pts + corner, tol=1e-9).all()

    def test_shrink_then_buffer_stays_inside(self):
        # (P - E) + E subsets P; with support-based buffering the offsets
        # cancel exactly, so membership matches P on the nose
        rng = np.random.default_rng(22)
        for _ in range(10):
            A, b = random_bounded_hpoly(rng, 2)
            p = HPolytope(A, b)
            half = rng.uniform(0.05, 0.3, 2)
            e = Hyperrectangle(-half, half)
            back = minkowski_buffer(pontryagin_diff(p, e), e)
            pts = rng.uniform(-2.5, 2.5, size=(10_000, 2))
            assert p.contains(pts[back.contains(pts, tol=0.0)], tol=1e-12).all()

    def test_closed_form_matches_support_lp(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            A, b = random_bounded_hpoly(rng, 3)
            p = HPolytope(A, b)
            lo = rng.uniform(-0.5, 0.0, 3)
            hi = rng.uniform(0.0, 0.5, 3)
            e = Hyperrectangle(lo, hi)
            out = pontryagin_diff(p, e)
            e_poly = e.as_hpolytope()
            want = np.array([b[i] - support(e_poly, A[i]) for i in range(len(b))])
            assert np.abs(out.b - want).max() <= 1e-9


class TestMinkowskiBuffer:
    def test_axis_aligned_exact(self):
        p = unit_box(2).as_hpolytope()
        out = minkowski_buffer(p, Hyperrectangle([-0.5, -0.5], [0.5, 0.5]))
        assert np.allclose(out.b, 1.5)

    def test_zero_box_identity(self):
        p = unit_box(2).as_hpolytope()
        out = minkowski_buffer(p, Hyperrectangle([0.0, 0.0], [0.0, 0.0]))
        assert np.array_equal(out.b, p.b)

    def test_contains_all_sums(self):
        # sampling oracle: p + e always lands in the buffered set (the
        # result may be a strict superset of the true sum)
        rng = np.random.default_rng(11)
        tri = HPolytope(np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), np.array([1.0, 0.0, 0.0]))
        box = Hyperrectangle([-0.3, -0.2], [0.3, 0.4])
        out = minkowski_buffer(tri, box)
        ps = rng.uniform(0, 1, size=(10_000, 2))
        ps = ps[tri.contains(ps)]
        es = rng.uniform(box.lower, box.upper, size=(len(ps), 2))
        assert out.contains(ps + es, tol=1e-9).all()

    def test_box_closed_form_matches_lp_path(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            A, b = random_bounded_hpoly(rng, 3)
            p = HPolytope(A, b)
            lo = rng.uniform(-0.5, 0.0, 3)
            hi = rng.uniform(0.0, 0.5, 3)
            e = Hyperrectangle(lo, hi)
            out = minkowski_buffer(p, e)
            via_lp = minkowski_buffer(p, e.as_hpolytope())
            assert np.abs(out.b - via_lp.b).max() <= 1e-9


class TestPreimage:
    def test_identity_map(self):
        target = Hyperrectangle([0.0, 0.0], [1.0, 1.0]).as_hpolytope()
        region = Hyperrectangle([-10.0, -10.0], [10.0, 10.0]).as_hpolytope()
        out = preimage(target, region, np.eye(2), np.zeros(2))
        bb = bounding_box(out)
        assert np.allclose(bb.lower, [0, 0]) and np.allclose(bb.upper, [1, 1])

    def test_scaling_map(self):
        target = Hyperrectangle([0.0, 0.0], [2.0, 2.0]).as_hpolytope()
        region = Hyperrectangle([-10.0, -10.0], [10.0, 10.0]).as_hpolytope()
        out = preimage(target, region, 2.0 * np.eye(2), np.zeros(2))
        bb = bounding_box(out)
        assert np.allclose(bb.lower, [0, 0]) and np.allclose(bb.upper, [1, 1])

    def test_membership_matches_direct_check(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            At, bt = random_bounded_hpoly(rng, 2)
            Ar, br = random_bounded_hpoly(rng, 3)
            target, region = HPolytope(At, bt), HPolytope(Ar, br)
            C = rng.standard_normal((2, 3))
            d = rng.standard_normal(2)
            out = preimage(target, region, C, d)
            pts = rng.uniform(-2.5, 2.5, size=(10_000, 3))
            want = region.contains(pts) & target.contains(pts @ C.T + d)
            assert np.array_equal(out.contains(pts), want)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            preimage(
                unit_box(2).as_hpolytope(),
                unit_box(3).as_hpolytope(),
                np.eye(2),
                np.zeros(2),
            )


class TestSampleUniform:
    def test_reproducible_in_range(self):
        box = Hyperrectangle([0.0], [1.0])
        a = sample_uniform(box, 3, seed=9)
        b = sample_uniform(box, 3, seed=9)
        assert np.array_equal(a, b)
        assert ((a >= 0) & (a <= 1)).all()

    def test_degenerate_box(self):
        box = Hyperrectangle([2.0], [2.0])
        assert np.array_equal(sample_uniform(box, 5, seed=0), np.full((5, 1), 2.0))

    def test_law_of_large_numbers(self):
        box = Hyperrectangle([0.0], [1.0])
        xs = sample_uniform(box, 100_000, seed=1)
        assert abs(xs.mean() - 0.5) < 0.01


class TestChebyshevAndReduce:
    def test_chebyshev_unit_box(self):
        c, r = chebyshev_center(unit_box(2).as_hpolytope())
        assert abs(r - 1.0) <= 1e-9
        assert np.abs(c).max() <= 1e-9

    def test_chebyshev_negative_radius_for_empty(self):
        _, r = chebyshev_center(HPolytope([[1.0], [-1.0]], [0.0, -1.0]))
        assert r < 0

    def test_reduce_drops_redundant_rows(self):
        box = unit_box(2).as_hpolytope()
        fat = HPolytope(np.vstack([box.A, [[1.0, 0.0]]]), np.append(box.b, 5.0))
        slim = reduce(fat)
        assert slim.n_rows == 4
        pts = np.random.default_rng(1).uniform(-2, 2, size=(10_000, 2))
        assert np.array_equal(slim.contains(pts), fat.contains(pts))

    def test_reduce_keeps_essential_rows(self):
        rng = np.random.default_rng(14)
        A, b = random_bounded_hpoly(rng, 2, n_extra=2, radius=1.0)
        p = HPolytope(A, b)
        slim = reduce(p)
        pts = rng.uniform(-1.5, 1.5, size=(10_000, 2))
        assert np.array_equal(slim.contains(pts), p.contains(pts))


class TestAgentBody:
    def test_octagon_contains_disc(self):
        oct8 = circumscribed_octagon(0.5)
        rng = np.random.default_rng(15)
        angles = rng.uniform(0, 2 * np.pi, 1000)
        pts = 0.5 * np.column_stack([np.cos(angles), np.sin(angles)])
        assert oct8.contains(pts, tol=1e-12).all()

    def test_buffered_obstacle_covers_disc_sum(self):
        obstacle = Hyperrectangle([0.0, 0.0], [1.0, 1.0]).as_hpolytope()
        grown = buffer_agent_body(obstacle, 0.25)
        rng = np.random.default_rng(16)
        ps = rng.uniform(0, 1, size=(5000, 2))
        angles = rng.uniform(0, 2 * np.pi, 5000)
        radii = 0.25 * np.sqrt(rng.uniform(0, 1, 5000))
        discs = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        assert grown.contains(ps + discs, tol=1e-9).all()

    def test_zero_radius_is_identity(self):
        obstacle = unit_box(2).as_hpolytope()
        assert buffer_agent_body(obstacle, 0.0) is obstacle
