"""Linear-programming oracle shared by every geometric predicate.

All emptiness, containment and support queries in this package reduce to
one LP shape: maximize ``objective . x`` subject to ``A x <= b`` (plus
optional variable bounds).  Centralizing the solve keeps tolerances and
status handling consistent: a solver failure is always surfaced as
:class:`LpSolverError` ("unknown"), never silently treated as infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linprog

#: Feasibility tolerance: a returned witness satisfies A x <= b + EPS_FEAS.
EPS_FEAS = 1e-7
#: Optimality tolerance on instances with a known exact optimum.
EPS_OPT = 1e-7


class LpError(Exception):
    """Base class for LP oracle failures."""


class LpInputError(LpError):
    """Malformed instance (dimension mismatch, non-finite data)."""


class LpSolverError(LpError):
    """Numerical failure after restarts.  Callers must treat the answer as
    unknown, never as "safe"."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """maximize ``objective . x``  s.t.  ``A x <= b``, ``lower <= x <= upper``.

    ``A`` has one row per constraint; ``lower``/``upper`` are optional
    per-variable bounds (``None`` entries mean unbounded).
    """

    objective: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.size == 0:
            A = A.reshape(0, c.size)
        if A.shape[0] != b.size:
            raise LpInputError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if A.shape[1] != c.size:
            raise LpInputError(f"A has {A.shape[1]} columns but objective has {c.size}")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise LpInputError("non-finite entries in LP data")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: float
    witness: np.ndarray | None = None

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _variable_bounds(lp: LinearProgram):
    if lp.lower is None and lp.upper is None:
        return [(None, None)] * lp.n_vars
    lo = [None] * lp.n_vars if lp.lower is None else [float(v) for v in lp.lower]
    hi = [None] * lp.n_vars if lp.upper is None else [float(v) for v in lp.upper]
    return list(zip(lo, hi))


def _run(lp: LinearProgram, method: str):
    A_ub = lp.A if lp.n_rows > 0 else None
    b_ub = lp.b if lp.n_rows > 0 else None
    return linprog(
        c=-lp.objective,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=_variable_bounds(lp),
        method=method,
    )


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve one LP, maximizing the objective.

    Status is trustworthy: an UNBOUNDED verdict is double-checked with a
    zero-objective feasibility phase so that INFEASIBLE is never confused
    with unboundedness.  Restarts on the dual-simplex backend before giving
    up with :class:`LpSolverError`.
    """
    if lp.n_rows == 0 and not lp.objective.any() and lp.lower is None and lp.upper is None:
        # Degenerate instance: no constraints, zero objective.
        return LpOutcome(LpStatus.OPTIMAL, 0.0, np.zeros(lp.n_vars))

    res = _run(lp, "highs")
    if res.status not in (0, 2, 3):
        res = _run(lp, "highs-ds")

    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        viol = float((lp.A @ x - lp.b).max()) if lp.n_rows else 0.0
        if viol > EPS_FEAS * max(1.0, float(np.abs(lp.b).max()) if lp.n_rows else 1.0):
            raise LpSolverError(f"witness violates constraints by {viol:.3e}")
        return LpOutcome(LpStatus.OPTIMAL, float(lp.objective @ x), x)
    if res.status == 2:
        return LpOutcome(LpStatus.INFEASIBLE, float("nan"))
    if res.status == 3:
        # Second phase: confirm the feasible set is nonempty before
        # reporting unboundedness.
        if lp.objective.any():
            phase = solve(LinearProgram(np.zeros(lp.n_vars), lp.A, lp.b, lp.lower, lp.upper))
            if phase.status is LpStatus.INFEASIBLE:
                return LpOutcome(LpStatus.INFEASIBLE, float("nan"))
        return LpOutcome(LpStatus.UNBOUNDED, float("inf"))
    raise LpSolverError(f"LP solver failed with status {res.status}: {res.message}")


def feasible(A, b) -> bool:
    """True iff ``{x | A x <= b}`` is nonempty (zero-objective solve)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    out = solve(LinearProgram(np.zeros(A.shape[1]), A, b))
    return out.status is LpStatus.OPTIMAL
