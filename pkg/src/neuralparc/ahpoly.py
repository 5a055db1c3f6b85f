"""AH-polytopes: affine images of H-polytopes, with closed-form operations.

An AH-polytope is ``{C x + d | x in base}`` for an H-polytope base.  The
family is closed under intersection, pairwise convex hull and projection,
with explicit constructions; emptiness and point containment each reduce
to one feasibility LP.  Equality rows arising in the constructions are
encoded as paired inequalities so every query keeps the single
``A x <= b`` LP shape.
"""

from __future__ import annotations

import numpy as np

from .hpoly import HPolytope
from .lp import EPS_FEAS, feasible


class AHPolytope:
    """``{C x + d | x in base}`` with base an :class:`HPolytope`.

    ``dim`` is the ambient (image) dimension; the base may live in a much
    higher dimension after repeated constructions.
    """

    __slots__ = ("base", "C", "d")

    def __init__(self, base: HPolytope, C, d):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        d = np.asarray(d, dtype=float).ravel()
        if C.shape[1] != base.dim:
            raise ValueError(f"C has {C.shape[1]} columns but base dim is {base.dim}")
        if C.shape[0] != d.size:
            raise ValueError("C rows must match d length")
        C = np.ascontiguousarray(C)
        d = np.ascontiguousarray(d)
        C.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("AHPolytope is immutable")

    @property
    def dim(self) -> int:
        return self.C.shape[0]

    def __repr__(self):
        return f"AHPolytope(dim={self.dim}, base_dim={self.base.dim}, base_rows={self.base.n_rows})"

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "C": self.C.tolist(), "d": self.d.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AHPolytope":
        return cls(HPolytope.from_dict(d["base"]), np.array(d["C"]), np.array(d["d"]))


def from_hpolytope(p: HPolytope) -> AHPolytope:
    """Embed an H-polytope as its own affine image (identity map)."""
    return AHPolytope(p, np.eye(p.dim), np.zeros(p.dim))


def project(p: HPolytope, m: int) -> AHPolytope:
    """Projection of ``p`` onto its first ``m`` coordinates as an AH-polytope."""
    if not 0 < m <= p.dim:
        raise ValueError(f"projection target {m} out of range for dim {p.dim}")
    C = np.zeros((m, p.dim))
    C[:, :m] = np.eye(m)
    return AHPolytope(p, C, np.zeros(m))


def intersect_ah(u1: AHPolytope, u2: AHPolytope) -> AHPolytope:
    """Exact intersection of two AH-polytopes.

    Lifted base over the pair ``(x, y)`` of operand base points with the
    image-equality ``C1 x + d1 = C2 y + d2`` as two inequality blocks; the
    map picks the first operand's image.
    """
    if u1.dim != u2.dim:
        raise ValueError("intersect_ah requires equal ambient dimensions")
    n1, n2 = u1.base.dim, u2.base.dim
    r1, r2 = u1.base.n_rows, u2.base.n_rows
    m = u1.dim
    A = np.block(
        [
            [u1.base.A, np.zeros((r1, n2))],
            [np.zeros((r2, n1)), u2.base.A],
            [u1.C, -u2.C],
            [-u1.C, u2.C],
        ]
    )
    b = np.concatenate([u1.base.b, u2.base.b, u2.d - u1.d, u1.d - u2.d])
    C = np.hstack([u1.C, np.zeros((m, n2))])
    return AHPolytope(HPolytope(A, b), C, u1.d.copy())


def convex_hull_ah(u1: AHPolytope, u2: AHPolytope) -> AHPolytope:
    """Convex hull of two AH-polytopes with bounded bases.

    Lifted base over ``(x, y, gamma)`` with ``gamma in [0, 1]`` scaling the
    two operands: ``A1 x <= gamma b1`` and ``A2 y <= (1-gamma) b2``; the
    image is ``C1 x + C2 y + (d1 - d2) gamma + d2``.  Exact when both bases
    are bounded (their recession cones are trivial).
    """
    if u1.dim != u2.dim:
        raise ValueError("convex_hull_ah requires equal ambient dimensions")
    n1, n2 = u1.base.dim, u2.base.dim
    r1, r2 = u1.base.n_rows, u2.base.n_rows
    A = np.block(
        [
            [u1.base.A, np.zeros((r1, n2)), -u1.base.b[:, None]],
            [np.zeros((r2, n1)), u2.base.A, u2.base.b[:, None]],
            [np.zeros((1, n1)), np.zeros((1, n2)), np.ones((1, 1))],
            [np.zeros((1, n1)), np.zeros((1, n2)), -np.ones((1, 1))],
        ]
    )
    b = np.concatenate([np.zeros(r1), u2.base.b, [1.0], [0.0]])
    C = np.hstack([u1.C, u2.C, (u1.d - u2.d)[:, None]])
    return AHPolytope(HPolytope(A, b), C, u2.d.copy())


def is_empty_ah(u: AHPolytope) -> bool:
    """True iff the set is empty, i.e. the base is infeasible (one LP)."""
    return not feasible(u.base.A, u.base.b)


def contains_point_ah(u: AHPolytope, y, slack: float = EPS_FEAS) -> bool:
    """True iff ``y = C x + d`` for some base point ``x`` (one LP).

    ``slack`` relaxes the image-equality rows: a positive value counts
    points within that distance of the set as inside (the conservative
    polarity for avoid-set queries); zero demands exact representability
    up to solver tolerance.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != u.dim:
        raise ValueError("query point dimension mismatch")
    A = np.vstack([u.base.A, u.C, -u.C])
    rhs = y - u.d
    b = np.concatenate([u.base.b, rhs + slack, -rhs + slack])
    return feasible(A, b)
