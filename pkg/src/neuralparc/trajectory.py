"""Trajectory model on top of a ReLU network.

The network maps a parameter vector ``k`` to the stacked labels
``(p(dt), ..., p(t_f), q)`` for trajectories started at the origin;
translation invariance turns that into a prediction from any start ``p0``
by adding ``p0`` to every workspace block.  Per-timestep affine slices of
a region's map (with the identity prepended on the ``p0`` block) are the
working currency of all reach/avoid computations, so the row-index
arithmetic lives here, in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ReluNetwork
from .regions import AffineRegion


@dataclass(frozen=True)
class TrajectorySpec:
    """Workspace/goal-state dimensions and time discretization."""

    n_p: int
    n_q: int
    t_f: float
    dt: float

    def __post_init__(self):
        if self.n_p < 1 or self.n_q < 0:
            raise ValueError("need n_p >= 1 and n_q >= 0")
        if self.dt <= 0 or self.t_f <= 0:
            raise ValueError("need positive dt and t_f")
        steps = self.t_f / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_f must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return round(self.t_f / self.dt)

    @property
    def times(self) -> np.ndarray:
        """Grid ``0, dt, ..., t_f`` (n_steps + 1 values)."""
        return np.linspace(0.0, self.t_f, self.n_steps + 1)

    @property
    def label_dim(self) -> int:
        return self.n_steps * self.n_p + self.n_q

    def to_dict(self) -> dict:
        return {"n_p": self.n_p, "n_q": self.n_q, "t_f": self.t_f, "dt": self.dt}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        return cls(int(d["n_p"]), int(d["n_q"]), float(d["t_f"]), float(d["dt"]))


def predict(net: ReluNetwork, spec: TrajectorySpec, p0, k):
    """Predicted trajectory grid and goal states from start ``p0``.

    Returns ``(traj, q)`` with ``traj[s] = p_hat(s*dt)`` for
    ``s = 0..n_steps`` (so ``traj[0] == p0`` exactly) and ``q`` the
    predicted extra goal states, which do not depend on ``p0``.
    """
    p0 = np.asarray(p0, dtype=float).ravel()
    k = np.asarray(k, dtype=float).ravel()
    if p0.size != spec.n_p:
        raise ValueError("p0 dimension mismatch")
    y = net.forward(k)
    if y.size != spec.label_dim:
        raise ValueError("network output does not match the trajectory layout")
    body = y[: spec.n_steps * spec.n_p].reshape(spec.n_steps, spec.n_p) + p0
    traj = np.vstack([p0, body])
    q = y[spec.n_steps * spec.n_p :]
    return traj, q


def predict_batch(net: ReluNetwork, spec: TrajectorySpec, p0s, ks):
    """Vectorized :func:`predict` over row batches of ``p0`` and ``k``."""
    p0s = np.atleast_2d(np.asarray(p0s, dtype=float))
    ks = np.atleast_2d(np.asarray(ks, dtype=float))
    Y = net.forward(ks)
    body = Y[:, : spec.n_steps * spec.n_p].reshape(-1, spec.n_steps, spec.n_p)
    body = body + p0s[:, None, :]
    traj = np.concatenate([p0s[:, None, :], body], axis=1)
    q = Y[:, spec.n_steps * spec.n_p :]
    return traj, q


@dataclass
class SlicedAffineMap:
    """Per-timestep affine maps of one region, on ``[p0; k]``.

    ``Cs[s] @ [p0; k] + ds[s]`` is the predicted position at ``s*dt`` and
    ``Cq @ [p0; k] + dq`` the predicted goal states, for every ``[p0; k]``
    whose parameter block lies in the region.  ``Cs[0]`` is ``[I 0]`` with
    zero offset by construction.
    """

    Cs: np.ndarray  # (n_steps+1, n_p, n_p+n_k)
    ds: np.ndarray  # (n_steps+1, n_p)
    Cq: np.ndarray  # (n_q, n_p+n_k)
    dq: np.ndarray  # (n_q,)
    region_index: int

    @property
    def n_steps(self) -> int:
        return self.Cs.shape[0] - 1

    def position_map(self, s: int):
        return self.Cs[s], self.ds[s]

    def final_stacked_map(self):
        """Map sending ``[p0; k]`` to ``[p_hat(t_f); q_hat]``."""
        return np.vstack([self.Cs[-1], self.Cq]), np.concatenate([self.ds[-1], self.dq])

    def positions(self, z) -> np.ndarray:
        """All grid positions for one ``[p0; k]`` point: shape (n_steps+1, n_p)."""
        z = np.asarray(z, dtype=float).ravel()
        return np.einsum("sij,j->si", self.Cs, z) + self.ds


def slice_region(region: AffineRegion, spec: TrajectorySpec) -> SlicedAffineMap:
    """Extract the per-timestep maps from a region's full affine map.

    For slice ``s >= 1``, rows ``(s-1)*n_p .. s*n_p`` of the region map
    give the parameter block and the identity is prepended as the ``p0``
    block; the goal-state slice takes the trailing ``n_q`` rows with a
    zero ``p0`` block.
    """
    n_p, n_q, S = spec.n_p, spec.n_q, spec.n_steps
    Ck, dk = region.C, region.d
    if Ck.shape[0] != spec.label_dim:
        raise ValueError("region map output does not match the trajectory layout")
    n_k = Ck.shape[1]
    Cs = np.zeros((S + 1, n_p, n_p + n_k))
    ds = np.zeros((S + 1, n_p))
    Cs[0, :, :n_p] = np.eye(n_p)
    for s in range(1, S + 1):
        lo, hi = (s - 1) * n_p, s * n_p
        Cs[s, :, :n_p] = np.eye(n_p)
        Cs[s, :, n_p:] = Ck[lo:hi]
        ds[s] = dk[lo:hi]
    Cq = np.hstack([np.zeros((n_q, n_p)), Ck[S * n_p : S * n_p + n_q]])
    dq = dk[S * n_p : S * n_p + n_q]
    return SlicedAffineMap(Cs=Cs, ds=ds, Cq=Cq, dq=dq, region_index=region.index)


def interpolate(p_start, p_end, t_start: float, dt: float, t_query: float) -> np.ndarray:
    """Linear interpolation between consecutive grid positions.

    ``t_query`` must lie in ``[t_start, t_start + dt]`` (up to round-off).
    """
    p_start = np.asarray(p_start, dtype=float)
    p_end = np.asarray(p_end, dtype=float)
    frac = (t_query - t_start) / dt
    if frac < -1e-9 or frac > 1.0 + 1e-9:
        raise ValueError("query time outside the interpolation interval")
    frac = min(max(frac, 0.0), 1.0)
    return p_start + (p_end - p_start) * frac
