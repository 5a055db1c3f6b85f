"""H-polytopes, hyperrectangles and their closed-form set operations.

An H-polytope is ``{x | A x <= b}``.  Intersection and Cartesian product
are exact constraint stacking.  Pontryagin difference with a box subtracts
the box support from each offset (exact).  The Minkowski sum with a box is
implemented as support-function buffering of the existing constraints:
always a superset of the true sum, and exact whenever the constraint
normals are axis-aligned.  Since the sum is only ever used to grow
obstacles, over-approximation is sound.
"""

from __future__ import annotations

import numpy as np

from .lp import EPS_FEAS, LinearProgram, LpStatus, feasible, solve


class HPolytope:
    """Convex set ``{x in R^dim | A x <= b}``.

    Values are immutable after construction; all operations return new
    polytopes.
    """

    __slots__ = ("A", "b")

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        A = np.ascontiguousarray(A)
        b = np.ascontiguousarray(b)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def __setattr__(self, name, value):
        raise AttributeError("HPolytope is immutable")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, rows={self.n_rows})"

    def contains(self, x, tol: float = EPS_FEAS):
        """Membership of one point (bool) or a batch of row points (bool array)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool((self.A @ x <= self.b + tol).all())
        return (x @ self.A.T <= self.b + tol).all(axis=1)

    def is_empty(self) -> bool:
        """True iff the feasible set is empty (one zero-objective LP)."""
        return not feasible(self.A, self.b)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HPolytope":
        if "box" in d:
            return Hyperrectangle.from_dict(d).as_hpolytope()
        return cls(np.array(d["A"], dtype=float), np.array(d["b"], dtype=float))


class Hyperrectangle:
    """Axis-aligned box ``[lower_1, upper_1] x ... x [lower_n, upper_n]``.

    Degenerate boxes (``lower == upper`` in some coordinate) are allowed.
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        if lower.size != upper.size:
            raise ValueError("lower and upper must have equal length")
        if (lower > upper).any():
            raise ValueError("box requires lower <= upper elementwise")
        lower = np.ascontiguousarray(lower)
        upper = np.ascontiguousarray(upper)
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __setattr__(self, name, value):
        raise AttributeError("Hyperrectangle is immutable")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def __repr__(self):
        return f"Hyperrectangle({self.lower.tolist()}, {self.upper.tolist()})"

    def as_hpolytope(self) -> HPolytope:
        """The 2n-constraint form ``[I; -I] x <= [upper; -lower]``."""
        eye = np.eye(self.dim)
        return HPolytope(np.vstack([eye, -eye]), np.concatenate([self.upper, -self.lower]))

    def contains(self, x, tol: float = EPS_FEAS):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(((x >= self.lower - tol) & (x <= self.upper + tol)).all())
        return ((x >= self.lower - tol) & (x <= self.upper + tol)).all(axis=1)

    def support(self, direction) -> float:
        """max over the box of ``direction . x``, in closed form."""
        a = np.asarray(direction, dtype=float).ravel()
        if a.size != self.dim:
            raise ValueError("direction dimension mismatch")
        return float(a @ self.center + np.abs(a) @ self.half_widths)

    def to_dict(self) -> dict:
        return {"box": {"lower": self.lower.tolist(), "upper": self.upper.tolist()}}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperrectangle":
        box = d["box"] if "box" in d else d
        return cls(np.array(box["lower"], dtype=float), np.array(box["upper"], dtype=float))


def set_from_dict(d: dict):
    """Parse either JSON form: ``{"A":..., "b":...}`` or ``{"box": {...}}``."""
    if "box" in d:
        return Hyperrectangle.from_dict(d)
    return HPolytope.from_dict(d)


def intersect(p: HPolytope, q: HPolytope) -> HPolytope:
    """Constraint stacking; membership iff member of both operands."""
    if p.dim != q.dim:
        raise ValueError("intersect requires equal dimensions")
    return HPolytope(np.vstack([p.A, q.A]), np.concatenate([p.b, q.b]))


def cartesian_product(p: HPolytope, q: HPolytope) -> HPolytope:
    """Block-diagonal stacking; the result lives in ``dim(p)+dim(q)``."""
    A = np.block(
        [
            [p.A, np.zeros((p.n_rows, q.dim))],
            [np.zeros((q.n_rows, p.dim)), q.A],
        ]
    )
    return HPolytope(A, np.concatenate([p.b, q.b]))


def support(p: HPolytope, direction) -> float:
    """max over ``p`` of ``direction . x`` via one LP.

    Returns ``inf`` when the polytope is unbounded in that direction;
    raises ``ValueError`` on an empty polytope.
    """
    a = np.asarray(direction, dtype=float).ravel()
    out = solve(LinearProgram(a, p.A, p.b))
    if out.status is LpStatus.INFEASIBLE:
        raise ValueError("support of an empty polytope")
    if out.status is LpStatus.UNBOUNDED:
        return float("inf")
    return out.value


def pontryagin_diff(p: HPolytope, e: Hyperrectangle) -> HPolytope:
    """``{x | x + e in p for all e in E}``: subtract the box support per row.

    Exact for any ``p`` when the subtrahend is a box.
    """
    if p.dim != e.dim:
        raise ValueError("pontryagin_diff requires equal dimensions")
    shrink = p.A @ e.center + np.abs(p.A) @ e.half_widths
    return HPolytope(p.A, p.b - shrink)


def minkowski_buffer(p: HPolytope, e) -> HPolytope:
    """Support-function buffering: add the support of ``e`` to each offset.

    Always a superset of the Minkowski sum ``p (+) e``; the two coincide
    when the normals of ``p`` are axis-aligned and ``e`` is a box.  ``e``
    may be a :class:`Hyperrectangle` (closed form) or an :class:`HPolytope`
    (one support LP per row of ``p``).
    """
    if p.dim != e.dim:
        raise ValueError("minkowski_buffer requires equal dimensions")
    if isinstance(e, Hyperrectangle):
        grow = p.A @ e.center + np.abs(p.A) @ e.half_widths
    else:
        grow = np.array([support(e, row) for row in p.A])
    return HPolytope(p.A, p.b + grow)


def preimage(target: HPolytope, region: HPolytope, C, d) -> HPolytope:
    """``{x in region | C x + d in target}`` as an H-polytope.

    Stacks the mapped target constraints ``(A_t C) x <= b_t - A_t d`` on
    top of the region constraints.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    if C.shape[0] != target.dim or d.size != target.dim:
        raise ValueError("map output dimension must match target dimension")
    if C.shape[1] != region.dim:
        raise ValueError("map input dimension must match region dimension")
    A = np.vstack([target.A @ C, region.A])
    b = np.concatenate([target.b - target.A @ d, region.b])
    return HPolytope(A, b)


def sample_uniform(box: Hyperrectangle, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. uniform points from the box, deterministic per seed.

    Degenerate coordinates simply repeat their single value.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(box.lower, box.upper, size=(n, box.dim))


def chebyshev_center(p: HPolytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball.

    The radius is negative when the polytope is empty (the ball LP stays
    feasible for negative radii).  Raises on polytopes that are unbounded
    in every direction needed by the ball.
    """
    norms = np.linalg.norm(p.A, axis=1)
    A = np.hstack([p.A, norms[:, None]])
    c = np.zeros(p.dim + 1)
    c[-1] = 1.0
    out = solve(LinearProgram(c, A, p.b))
    if out.status is LpStatus.UNBOUNDED:
        raise ValueError("chebyshev center of an unbounded polytope")
    if out.status is LpStatus.INFEASIBLE:
        # Cannot happen for finite data: any x with very negative r is feasible.
        raise ValueError("degenerate chebyshev LP")
    return out.witness[:-1], out.value


def bounding_box(p: HPolytope) -> Hyperrectangle:
    """Smallest enclosing box via 2*dim support LPs."""
    lo = np.empty(p.dim)
    hi = np.empty(p.dim)
    for j in range(p.dim):
        e = np.zeros(p.dim)
        e[j] = 1.0
        hi[j] = support(p, e)
        lo[j] = -support(p, -e)
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("bounding box of an unbounded polytope")
    return Hyperrectangle(lo, hi)


def reduce(p: HPolytope, tol: float = EPS_FEAS) -> HPolytope:
    """Drop redundant rows (one support LP per row, with the row relaxed).

    Optional hygiene pass; never required for correctness since all
    operations tolerate redundant rows.
    """
    keep = []
    for i in range(p.n_rows):
        a_i = p.A[i]
        if not a_i.any():
            if p.b[i] < -tol:
                keep.append(i)  # infeasible marker row, keep it
            continue
        b_relaxed = p.b.copy()
        b_relaxed[i] = p.b[i] + 1.0
        out = solve(LinearProgram(a_i, p.A, b_relaxed))
        if out.status is LpStatus.INFEASIBLE:
            # Empty even with the row relaxed: return a canonical empty set.
            return HPolytope(np.zeros((1, p.dim)), np.array([-1.0]))
        if out.status is LpStatus.UNBOUNDED or out.value > p.b[i] + tol:
            keep.append(i)
    if not keep:
        # Everything redundant: the set is the whole space clipped by nothing.
        return HPolytope(np.zeros((0, p.dim)), np.zeros(0))
    return HPolytope(p.A[keep], p.b[keep])


def circumscribed_octagon(radius: float) -> HPolytope:
    """Regular octagon circumscribing the disc of the given radius (2-D).

    Eight faces tangent to the disc (apothem = radius), so the octagon
    contains the disc: buffering obstacles with it over-approximates a
    circular body while staying polytopic.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    angles = np.arange(8) * (np.pi / 4)
    A = np.column_stack([np.cos(angles), np.sin(angles)])
    return HPolytope(A, np.full(8, float(radius)))


def buffer_by_ball(p: HPolytope, radius: float, inflate: float = 1.0) -> HPolytope:
    """Grow each offset by ``inflate * radius * ||row||`` (any dimension).

    Superset of the Minkowski sum with a ball of the given radius; with
    ``inflate = 1/cos(pi/8)`` it also covers the 2-D octagon buffering.
    """
    norms = np.linalg.norm(p.A, axis=1)
    return HPolytope(p.A, p.b + inflate * radius * norms)


def buffer_agent_body(obstacle: HPolytope, radius: float) -> HPolytope:
    """Buffer an obstacle by the agent's circular body.

    In 2-D the body disc is over-approximated by its circumscribed regular
    octagon and the obstacle offsets grow by the octagon support (exact
    vertex maximum).  In other dimensions a circumscribed-ball buffer of
    radius ``radius / cos(pi/8)`` is used, which dominates the octagon rule.
    """
    if radius == 0.0:
        return obstacle
    if obstacle.dim == 2:
        vertex_radius = radius / np.cos(np.pi / 8)
        vangles = np.pi / 8 + np.arange(8) * (np.pi / 4)
        verts = vertex_radius * np.column_stack([np.cos(vangles), np.sin(vangles)])
        grow = (obstacle.A @ verts.T).max(axis=1)
        return HPolytope(obstacle.A, obstacle.b + grow)
    return buffer_by_ball(obstacle, radius, inflate=1.0 / np.cos(np.pi / 8))
