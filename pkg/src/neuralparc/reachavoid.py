"""Backward reach-avoid computation over the trajectory model's regions.

Per region, the reach set is the exact preimage of the shrunken goal
through the stacked final-time/goal-state map, over the start box crossed
with the region.  The avoid set over-approximates, per obstacle and per
timestep interval, every start whose interpolated model path can touch
the buffered obstacle: the interval's endpoint preimages are projected to
the workspace and their convex hull (intersected with the projected reach
set) is one avoid piece.  A sample of the reach set whose start lies in
no piece is certified: the model path reaches the shrunken goal and stays
clear of every buffered obstacle, and the error bounds transfer both
guarantees to the black box.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .ahpoly import (
    AHPolytope,
    contains_point_ah,
    convex_hull_ah,
    intersect_ah,
    is_empty_ah,
    project,
)
from .bounds import ErrorBounds, PartitionedBounds, error_sets
from .hpoly import (
    HPolytope,
    Hyperrectangle,
    bounding_box,
    buffer_agent_body,
    cartesian_product,
    minkowski_buffer,
    pontryagin_diff,
    preimage,
    sample_uniform,
    set_from_dict,
)
from .lp import EPS_FEAS
from .network import ReluNetwork
from .regions import AffineRegion, RegionFrontier, walk_regions
from .seeding import derive_seed
from .trajectory import SlicedAffineMap, TrajectorySpec, slice_region

SCENARIO_FORMAT_VERSION = 1


@dataclass
class Scenario:
    """One online problem instance.

    The start box must contain the origin (predictions are translates of
    origin-started trajectories); the goal lives in the stacked
    workspace/goal-state space and obstacles in the workspace.
    """

    p0_box: Hyperrectangle
    k_box: Hyperrectangle
    spec: TrajectorySpec
    goal: HPolytope | Hyperrectangle
    obstacles: list
    agent_radius: float = 0.0
    system: str | None = None

    def __post_init__(self):
        if not self.p0_box.contains(np.zeros(self.p0_box.dim)):
            raise ValueError("the start box must contain the origin")
        if self.p0_box.dim != self.spec.n_p:
            raise ValueError("start box dimension must be n_p")
        if self.goal_poly.dim != self.spec.n_p + self.spec.n_q:
            raise ValueError("goal dimension must be n_p + n_q")
        for o in self.obstacle_polys:
            if o.dim != self.spec.n_p:
                raise ValueError("obstacle dimension must be n_p")
        if self.agent_radius < 0:
            raise ValueError("agent radius must be nonnegative")

    @property
    def goal_poly(self) -> HPolytope:
        g = self.goal
        return g.as_hpolytope() if isinstance(g, Hyperrectangle) else g

    @property
    def obstacle_polys(self) -> list[HPolytope]:
        return [
            o.as_hpolytope() if isinstance(o, Hyperrectangle) else o for o in self.obstacles
        ]

    def to_dict(self) -> dict:
        return {
            "version": SCENARIO_FORMAT_VERSION,
            "system": self.system,
            "spec": self.spec.to_dict(),
            "p0_box": self.p0_box.to_dict(),
            "k_box": self.k_box.to_dict(),
            "goal": self.goal.to_dict(),
            "obstacles": [o.to_dict() for o in self.obstacles],
            "agent_radius": self.agent_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("version") != SCENARIO_FORMAT_VERSION:
            raise ValueError(f"unsupported scenario version: {d.get('version')!r}")
        return cls(
            p0_box=Hyperrectangle.from_dict(d["p0_box"]),
            k_box=Hyperrectangle.from_dict(d["k_box"]),
            spec=TrajectorySpec.from_dict(d["spec"]),
            goal=set_from_dict(d["goal"]),
            obstacles=[set_from_dict(o) for o in d["obstacles"]],
            agent_radius=float(d.get("agent_radius", 0.0)),
            system=d.get("system"),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class PreparedSets:
    """Shrunken goal and buffered obstacles for one error-bound choice.

    ``obstacles[s][j]`` is obstacle ``j`` grown by the agent body and by
    the interval-``s`` error box.  ``infeasible`` is a certificate that no
    model trajectory can be steered into the goal under these bounds (the
    shrunken goal is empty), not an exception.
    """

    goal_shrunk: HPolytope
    obstacles: list[list[HPolytope]]
    infeasible: bool


def prepare(scenario: Scenario, bounds: ErrorBounds) -> PreparedSets:
    """Shrink the goal by the final-error box; buffer obstacles per interval."""
    if bounds.e_final.size != scenario.spec.n_p + scenario.spec.n_q:
        raise ValueError("final-error channels must match n_p + n_q")
    if bounds.e_interval.shape != (scenario.spec.n_steps, scenario.spec.n_p):
        raise ValueError("interval-error shape must be (n_steps, n_p)")
    final_box, interval_boxes = error_sets(bounds)
    goal_shrunk = pontryagin_diff(scenario.goal_poly, final_box)
    body_buffered = [
        buffer_agent_body(o, scenario.agent_radius) for o in scenario.obstacle_polys
    ]
    buffered = [
        [minkowski_buffer(o, box) for o in body_buffered] for box in interval_boxes
    ]
    return PreparedSets(
        goal_shrunk=goal_shrunk,
        obstacles=buffered,
        infeasible=goal_shrunk.is_empty(),
    )


@dataclass
class ReachSet:
    """Starts and parameters steering the model into the shrunken goal."""

    polytope: HPolytope
    region_index: int


def compute_brs(
    region: AffineRegion,
    sliced: SlicedAffineMap,
    scenario: Scenario,
    goal_shrunk: HPolytope,
) -> ReachSet:
    """Preimage of the shrunken goal over ``p0_box x region``."""
    Cf, df = sliced.final_stacked_map()
    domain = cartesian_product(scenario.p0_box.as_hpolytope(), region.region)
    return ReachSet(
        polytope=preimage(goal_shrunk, domain, Cf, df),
        region_index=region.index,
    )


@dataclass
class AvoidPiece:
    """One obstacle/interval avoid piece in the workspace.

    ``at_start``/``at_end`` are the projected endpoint preimages whose
    convex hull (cut to the projected reach set) forms ``ah``.
    """

    ah: AHPolytope
    obstacle: int
    step: int
    at_start: AHPolytope
    at_end: AHPolytope


@dataclass
class AvoidSet:
    """All nonempty avoid pieces of one region, plus pruning statistics."""

    pieces: list[AvoidPiece]
    region_index: int
    n_pruned: int = 0


def _lifted_region(region: AffineRegion, n_p: int) -> HPolytope:
    """The region constraints viewed in ``[p0; k]`` with a zero start block."""
    A = np.hstack([np.zeros((region.region.n_rows, n_p)), region.region.A])
    return HPolytope(A, region.region.b)


def compute_bas(
    region: AffineRegion,
    sliced: SlicedAffineMap,
    omega: HPolytope,
    obstacles_buffered: list[list[HPolytope]],
    n_p: int,
) -> AvoidSet:
    """Avoid pieces of one region against every buffered obstacle/interval.

    For interval ``s``, both endpoint preimages are taken against the same
    interval-``s`` buffered obstacle; a piece that is empty (or whose
    endpoint preimages are) cannot witness a collision and is pruned.
    """
    lifted = _lifted_region(region, n_p)
    omega_proj = project(omega, n_p)
    pieces: list[AvoidPiece] = []
    n_pruned = 0
    for j in range(len(obstacles_buffered[0]) if obstacles_buffered else 0):
        for s in range(len(obstacles_buffered)):
            target = obstacles_buffered[s][j]
            C_a, d_a = sliced.position_map(s)
            C_b, d_b = sliced.position_map(s + 1)
            at_start = project(preimage(target, lifted, C_a, d_a), n_p)
            if is_empty_ah(at_start):
                n_pruned += 1
                continue
            at_end = project(preimage(target, lifted, C_b, d_b), n_p)
            if is_empty_ah(at_end):
                n_pruned += 1
                continue
            piece = intersect_ah(omega_proj, convex_hull_ah(at_start, at_end))
            if is_empty_ah(piece):
                n_pruned += 1
                continue
            pieces.append(
                AvoidPiece(ah=piece, obstacle=j, step=s, at_start=at_start, at_end=at_end)
            )
    return AvoidSet(pieces=pieces, region_index=region.index, n_pruned=n_pruned)


@dataclass
class BrasSample:
    """One certified start/parameter pair with its containment certificate.

    ``verdicts[i]`` is the (False) containment verdict of the start point
    against nonempty avoid piece ``i``; all-False is what certifies the
    sample.
    """

    p0: np.ndarray
    k: np.ndarray
    region_index: int
    verdicts: list[bool]

    def to_dict(self) -> dict:
        return {
            "p0": np.asarray(self.p0).tolist(),
            "k": np.asarray(self.k).tolist(),
            "region_index": self.region_index,
            "verdicts": [bool(v) for v in self.verdicts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BrasSample":
        return cls(
            p0=np.array(d["p0"], dtype=float),
            k=np.array(d["k"], dtype=float),
            region_index=int(d["region_index"]),
            verdicts=[bool(v) for v in d["verdicts"]],
        )


def sample_bras(
    omega: HPolytope,
    avoid: AvoidSet,
    n_p: int,
    n_max: int,
    seed: int,
    max_draws: int | None = None,
) -> list[BrasSample]:
    """Certified samples from up to ``n_max`` reach-set hits.

    Rejection-samples the reach polytope's bounding box; membership uses
    the exclusive polarity (``A z <= b - eps``) while avoid-piece
    containment uses the inclusive one, so both roundings point toward
    safety.  Short-circuits on the first containing piece.  An empty
    result (including an empty reach set) is a valid outcome.
    """
    try:
        box = bounding_box(omega)
    except ValueError:
        return []  # empty reach set
    if max_draws is None:
        max_draws = 200 * n_max
    rng = np.random.default_rng(seed)
    samples: list[BrasSample] = []
    hits = 0
    draws = 0
    while hits < n_max and draws < max_draws:
        batch = min(max(4 * (n_max - hits), 64), max_draws - draws)
        draws += batch
        zs = rng.uniform(box.lower, box.upper, size=(batch, box.dim))
        inside = (zs @ omega.A.T <= omega.b - EPS_FEAS).all(axis=1)
        for z in zs[inside]:
            if hits >= n_max:
                break
            hits += 1
            p0 = z[:n_p]
            verdicts = []
            blocked = False
            for piece in avoid.pieces:
                hit = contains_point_ah(piece.ah, p0, slack=EPS_FEAS)
                verdicts.append(hit)
                if hit:
                    blocked = True
                    break
            if not blocked:
                samples.append(
                    BrasSample(
                        p0=p0.copy(),
                        k=z[n_p:].copy(),
                        region_index=avoid.region_index,
                        verdicts=verdicts,
                    )
                )
    return samples


@dataclass
class SolveBudget:
    """Caps on the region-exploration loop."""

    max_regions: int = 1000
    max_seconds: float | None = None
    samples_per_region: int = 50


@dataclass
class RegionReport:
    """Per-region outcome row of a solve run."""

    index: int
    cell: int | None
    brs_empty: bool
    n_pieces: int = 0
    n_pruned: int = 0
    samples_tried: int = 0
    n_found: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "cell": self.cell,
            "brs_empty": self.brs_empty,
            "n_pieces": self.n_pieces,
            "n_pruned": self.n_pruned,
            "samples_tried": self.samples_tried,
            "n_found": self.n_found,
            "found": self.n_found > 0,
        }


@dataclass
class SolveReport:
    """Outcome of one solve run.

    ``outcome`` is one of ``found`` (certified samples returned),
    ``exhausted`` (every region explored, none certified), ``budget``
    (region or time cap hit first) or ``infeasible`` (the shrunken goal is
    empty, certified up front).  Wall-clock numbers live in ``timings``
    and are excluded from the deterministic artifact.
    """

    outcome: str
    seed: int
    regions: list[RegionReport] = field(default_factory=list)
    samples: list[BrasSample] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def first_sample(self) -> BrasSample | None:
        return self.samples[0] if self.samples else None

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "seed": self.seed,
            "n_regions": self.n_regions,
            "regions": [r.to_dict() for r in self.regions],
            "samples": [s.to_dict() for s in self.samples],
            "first_sample": self.first_sample.to_dict() if self.samples else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        report = cls(outcome=d["outcome"], seed=int(d["seed"]))
        report.samples = [BrasSample.from_dict(s) for s in d.get("samples", [])]
        for r in d.get("regions", []):
            report.regions.append(
                RegionReport(
                    index=int(r["index"]),
                    cell=r.get("cell"),
                    brs_empty=bool(r["brs_empty"]),
                    n_pieces=int(r["n_pieces"]),
                    n_pruned=int(r["n_pruned"]),
                    samples_tried=int(r["samples_tried"]),
                    n_found=int(r["n_found"]),
                )
            )
        return report


def _exploration_units(scenario: Scenario, bounds, seed_k: np.ndarray):
    """Cells to explore with their bounds and seed points, seed cell first."""
    if isinstance(bounds, PartitionedBounds):
        first = bounds.cell_index(seed_k)
        order = [first] + [c for c in range(bounds.n_cells) if c != first]
        units = []
        for c in order:
            box, cell_bounds = bounds.cells[c]
            point = seed_k if c == first else box.center
            units.append((c, box, cell_bounds, point))
        return units
    return [(None, scenario.k_box, bounds, seed_k)]


def solve(
    scenario: Scenario,
    net: ReluNetwork,
    bounds,
    budget: SolveBudget | None = None,
    seed: int = 0,
) -> SolveReport:
    """Walk regions from a random parameter seed until a sample certifies.

    Per region: compute the reach set, skip ahead when it is empty,
    otherwise build the avoid set and draw samples; stop at the first
    region yielding certified samples.  With partitioned bounds the walk
    runs cell by cell (starting at the seed's cell), each with its own
    buffered sets.  All failures are reported outcomes, never exceptions.
    """
    if budget is None:
        budget = SolveBudget()
    if net.input_dim != scenario.k_box.dim:
        raise ValueError("network input dimension must match the parameter box")
    t_start = time.perf_counter()
    k0 = sample_uniform(scenario.k_box, 1, derive_seed(seed, 11))[0]
    report = SolveReport(outcome="exhausted", seed=seed)
    region_times: list[float] = []
    explored = 0
    any_feasible_cell = False

    for cell, cell_box, cell_bounds, seed_point in _exploration_units(scenario, bounds, k0):
        prep = prepare(scenario, cell_bounds)
        if prep.infeasible:
            continue
        any_feasible_cell = True
        frontier = RegionFrontier(domain=cell_box)
        walk = walk_regions(
            net, cell_box, seed_point, max_regions=budget.max_regions, frontier=frontier
        )
        for region in walk:
            if explored >= budget.max_regions or (
                budget.max_seconds is not None
                and time.perf_counter() - t_start > budget.max_seconds
            ):
                report.outcome = "budget"
                report.timings = _timings(t_start, region_times)
                return report
            t_region = time.perf_counter()
            region.index = explored
            explored += 1
            row = RegionReport(index=region.index, cell=cell, brs_empty=False)
            report.regions.append(row)
            sliced = slice_region(region, scenario.spec)
            reach = compute_brs(region, sliced, scenario, prep.goal_shrunk)
            if reach.polytope.is_empty():
                row.brs_empty = True
                region_times.append(time.perf_counter() - t_region)
                continue
            avoid = compute_bas(region, sliced, reach.polytope, prep.obstacles, scenario.spec.n_p)
            row.n_pieces = len(avoid.pieces)
            row.n_pruned = avoid.n_pruned
            samples = sample_bras(
                reach.polytope,
                avoid,
                scenario.spec.n_p,
                n_max=budget.samples_per_region,
                seed=derive_seed(seed, 13, region.index),
            )
            row.samples_tried = budget.samples_per_region
            row.n_found = len(samples)
            region_times.append(time.perf_counter() - t_region)
            if samples:
                report.outcome = "found"
                report.samples = samples
                report.timings = _timings(t_start, region_times)
                return report
        if frontier.capped:
            report.outcome = "budget"
            report.timings = _timings(t_start, region_times)
            return report

    if not any_feasible_cell:
        report.outcome = "infeasible"
    report.timings = _timings(t_start, region_times)
    return report


def _timings(t_start: float, region_times: list[float]) -> dict:
    return {
        "total_seconds": time.perf_counter() - t_start,
        "region_seconds": list(region_times),
    }
