"""Exact enumeration of a ReLU network's affine regions over a box domain.

Each activation pattern fixes a mask per hidden layer; composing the
masked layers yields one affine map and one polytopic cell: the set of
inputs on which every hidden preactivation keeps its sign.  Neighboring
cells are discovered by re-seeding just beyond the relative interior of a
shared facet, and a FIFO walk over facet-adjacency eventually tessellates
the whole domain.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .hpoly import HPolytope, Hyperrectangle, chebyshev_center
from .lp import EPS_FEAS, LinearProgram, LpStatus, solve
from .network import ReluNetwork

#: Cells with an inscribed-ball radius below this are measure-zero slivers;
#: they cannot host samples and destabilize the facet LPs, so they are
#: dropped during enumeration.
DEGENERATE_RADIUS = 1e-8

#: Re-seed push distances past a facet, tried in order on pattern mismatch.
PUSH_LADDER = (1e-6, 1e-5, 1e-4, 1e-3)


@dataclass
class AffineRegion:
    """One polytopic cell with its exact affine map.

    ``region`` stacks the 2*dim domain-face rows first, then one row per
    hidden neuron (normalized); ``row_neurons[i]`` names the (layer, unit)
    behind neuron row ``n_domain_rows + i``.  On the cell,
    ``forward(x) == C x + d`` exactly.
    """

    region: HPolytope
    C: np.ndarray
    d: np.ndarray
    pattern: tuple[tuple[bool, ...], ...]
    index: int
    domain: Hyperrectangle
    n_domain_rows: int
    row_neurons: tuple[tuple[int, int], ...]

    def affine_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.C @ x + self.d
        return x @ self.C.T + self.d

    @property
    def neuron_row_range(self) -> range:
        return range(self.n_domain_rows, self.region.n_rows)

    def to_dict(self) -> dict:
        return {
            "pattern": [list(layer) for layer in self.pattern],
            "A": self.region.A.tolist(),
            "b": self.region.b.tolist(),
            "C": self.C.tolist(),
            "d": self.d.tolist(),
        }


def region_at(net: ReluNetwork, x, domain: Hyperrectangle, index: int = 0) -> AffineRegion:
    """The affine region containing ``x``, clipped to the domain box.

    Composes the layers under the activation masks observed at ``x``; one
    constraint per hidden neuron keeps its preactivation sign (ties count
    active).  Rows are normalized to unit norm.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != net.input_dim:
        raise ValueError("seed dimension mismatch")
    if not domain.contains(x):
        raise ValueError("seed lies outside the domain box")

    n = net.input_dim
    M = np.eye(n)
    v = np.zeros(n)
    rows, rhs, neuron_ids = [], [], []
    pattern = []
    for layer, (W, w) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
        P = W @ M
        c = W @ v + w
        pre = P @ x + c
        active = pre >= 0.0
        pattern.append(tuple(bool(a) for a in active))
        for unit in range(W.shape[0]):
            if active[unit]:
                row, offset = -P[unit], c[unit]
            else:
                row, offset = P[unit], -c[unit]
            norm = np.linalg.norm(row)
            if norm > 1e-12:
                row = row / norm
                offset = offset / norm
            rows.append(row)
            rhs.append(offset)
            neuron_ids.append((layer, unit))
        mask = active.astype(float)
        M = P * mask[:, None]
        v = c * mask
    C = net.weights[-1] @ M
    d = net.weights[-1] @ v + net.biases[-1]

    box = domain.as_hpolytope()
    if rows:
        A = np.vstack([box.A, np.array(rows)])
        b = np.concatenate([box.b, np.array(rhs)])
    else:
        A, b = box.A, box.b
    return AffineRegion(
        region=HPolytope(A, b),
        C=C,
        d=d,
        pattern=tuple(pattern),
        index=index,
        domain=domain,
        n_domain_rows=box.n_rows,
        row_neurons=tuple(neuron_ids),
    )


def essential_constraints(region: AffineRegion) -> list[int]:
    """Neuron rows whose removal enlarges the cell (one LP each).

    Domain-face rows are excluded; returned indices address rows of
    ``region.region``.  Raises on an empty region.
    """
    A, b = region.region.A, region.region.b
    essential = []
    feasible_seen = False
    for i in region.neuron_row_range:
        a_i = A[i]
        if not a_i.any():
            continue
        relaxed = b.copy()
        relaxed[i] = b[i] + 1.0
        out = solve(LinearProgram(a_i, A, relaxed))
        if out.status is LpStatus.INFEASIBLE:
            raise ValueError("essential_constraints on an empty region")
        feasible_seen = True
        if out.status is LpStatus.UNBOUNDED or out.value > b[i] + EPS_FEAS:
            essential.append(i)
    if not feasible_seen and region.region.is_empty():
        raise ValueError("essential_constraints on an empty region")
    return essential


def _facet_interior_point(region: AffineRegion, row: int) -> np.ndarray | None:
    """Chebyshev-style center of the facet ``{x in cell | A_row x = b_row}``.

    Maximizes clearance from the other rows while pinned to the facet
    hyperplane; returns None when the facet has no relative interior.
    """
    A, b = region.region.A, region.region.b
    n = region.region.dim
    others = [j for j in range(region.region.n_rows) if j != row]
    norms = np.linalg.norm(A[others], axis=1)
    top = np.hstack([A[others], norms[:, None]])
    pin = np.hstack([np.vstack([A[row], -A[row]]), np.zeros((2, 1))])
    lp = LinearProgram(
        np.concatenate([np.zeros(n), [1.0]]),
        np.vstack([top, pin]),
        np.concatenate([b[others], [b[row], -b[row]]]),
    )
    out = solve(lp)
    if out.status is not LpStatus.OPTIMAL or out.value <= 1e-10:
        return None
    return out.witness[:n]


def neighbor(net: ReluNetwork, region: AffineRegion, row: int) -> AffineRegion | None:
    """The region across the hyperplane of ``row``, or None.

    Re-seeds from the facet's interior point pushed slightly along the
    flipped normal, growing the push on pattern mismatch.  Returns None
    when the push exits the domain or never lands across the facet
    (e.g. the row is a domain face).
    """
    if row < region.n_domain_rows or row >= region.region.n_rows:
        return None
    a = region.region.A[row]
    if not a.any():
        return None
    center = _facet_interior_point(region, row)
    if center is None:
        return None
    layer, unit = region.row_neurons[row - region.n_domain_rows]
    for eps in PUSH_LADDER:
        x_new = center + eps * a
        if not region.domain.contains(x_new, tol=0.0):
            continue
        cand = region_at(net, x_new, region.domain)
        if cand.pattern == region.pattern:
            continue
        if cand.pattern[layer][unit] != region.pattern[layer][unit]:
            return cand
    return None


@dataclass
class Enumeration:
    """Result of a region walk; ``complete`` is False when capped or stopped."""

    regions: list[AffineRegion]
    complete: bool


@dataclass
class RegionFrontier:
    """Bookkeeping of a walk: discovered pattern keys and the FIFO queue."""

    domain: Hyperrectangle
    discovered: set = field(default_factory=set)
    queue: deque = field(default_factory=deque)
    capped: bool = False


def walk_regions(
    net: ReluNetwork,
    domain: Hyperrectangle,
    seed_point,
    max_regions: int = 100_000,
    frontier: RegionFrontier | None = None,
):
    """Generate regions in FIFO discovery order, starting at ``seed_point``.

    Deterministic for a fixed seed point.  Degenerate neighbor cells
    (inscribed radius below :data:`DEGENERATE_RADIUS`) are discarded.
    Exhausts the facet-adjacency closure, or stops at ``max_regions`` and
    marks the frontier capped.
    """
    if frontier is None:
        frontier = RegionFrontier(domain=domain)
    first = region_at(net, seed_point, domain, index=0)
    frontier.discovered.add(first.pattern)
    frontier.queue.append(first)
    count = 1
    yield first
    while frontier.queue:
        current = frontier.queue.popleft()
        for row in essential_constraints(current):
            cand = neighbor(net, current, row)
            if cand is None or cand.pattern in frontier.discovered:
                continue
            frontier.discovered.add(cand.pattern)
            _, radius = chebyshev_center(cand.region)
            if radius < DEGENERATE_RADIUS:
                continue
            if count >= max_regions:
                frontier.capped = True
                return
            cand.index = count
            count += 1
            frontier.queue.append(cand)
            yield cand


def enumerate_all(
    net: ReluNetwork,
    domain: Hyperrectangle,
    seed_point,
    stop=None,
    max_regions: int = 100_000,
) -> Enumeration:
    """Full breadth-first closure of the region walk.

    ``stop`` (region -> bool) requests early termination; hitting
    ``max_regions`` flags the result incomplete.
    """
    regions: list[AffineRegion] = []
    frontier = RegionFrontier(domain=domain)
    for region in walk_regions(net, domain, seed_point, max_regions=max_regions, frontier=frontier):
        regions.append(region)
        if stop is not None and stop(region):
            return Enumeration(regions, complete=False)
    return Enumeration(regions, complete=not frontier.capped)
