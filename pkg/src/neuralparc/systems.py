"""Synthetic black-box trajectory families and offline data collection.

Both built-in systems integrate their dynamics with fixed-step RK4 at
dt/20 and *define* the continuous trajectory as the piecewise-linear
interpolation of that fine grid.  Trajectories are always integrated from
the origin and translated afterwards, so translation invariance in the
workspace holds exactly, disturbances included.  Disturbances enter in
body frame only and are piecewise constant over each dt interval, with
per-channel amplitude limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .hpoly import Hyperrectangle, sample_uniform
from .network import TrainingSet
from .seeding import derive_seed
from .trajectory import TrajectorySpec

SUBSTEPS_PER_STEP = 20


class BlackBoxSystem:
    """A named trajectory family queried only through rollouts.

    Subclasses fix the parameter box, the trajectory spec and the
    disturbance amplitudes, and implement the state-space hooks.  The
    public surface is ``evaluate(p0, k, t, disturbance_seed)`` for one
    position, ``final_q(k, disturbance_seed)`` for the extra goal states,
    and the batched ``rollout_batch`` used by data collection and error
    estimation.
    """

    name: str = "abstract"
    spec: TrajectorySpec
    k_box: Hyperrectangle
    default_p0_box: Hyperrectangle
    #: per-channel disturbance amplitude; empty array means no disturbance.
    disturbance_amplitudes: np.ndarray = np.zeros(0)

    _CACHE_SIZE = 128

    def __init__(self):
        self._rollout_cache: dict = {}

    # -- state-space hooks -------------------------------------------------
    def _initial_states(self, ks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _derivative(self, t: float, states, ks, dist) -> np.ndarray:
        raise NotImplementedError

    def _positions_of(self, states: np.ndarray) -> np.ndarray:
        return states[:, :2]

    def _final_q_of(self, states: np.ndarray, ks: np.ndarray) -> np.ndarray:
        return np.zeros((states.shape[0], 0))

    # -- integration -------------------------------------------------------
    @property
    def n_p(self) -> int:
        return self.spec.n_p

    @property
    def n_q(self) -> int:
        return self.spec.n_q

    @property
    def n_k(self) -> int:
        return self.k_box.dim

    @property
    def fine_dt(self) -> float:
        return self.spec.dt / SUBSTEPS_PER_STEP

    @property
    def fine_times(self) -> np.ndarray:
        n_fine = self.spec.n_steps * SUBSTEPS_PER_STEP
        return np.linspace(0.0, self.spec.t_f, n_fine + 1)

    def disturbance_values(self, seeds) -> np.ndarray:
        """Realized piecewise-constant disturbances, (N, n_steps, n_channels)."""
        S = self.spec.n_steps
        n_ch = self.disturbance_amplitudes.size
        seeds = np.asarray(seeds)
        if n_ch == 0:
            return np.zeros((seeds.size, S, 0))
        out = np.empty((seeds.size, S, n_ch))
        amp = self.disturbance_amplitudes
        for i, s in enumerate(seeds):
            rng = np.random.default_rng(int(s))
            out[i] = rng.uniform(-amp, amp, size=(S, n_ch))
        return out

    def rollout_batch(self, ks, seeds):
        """Integrate a batch from the origin.

        Returns ``(positions, q)`` with positions of shape
        ``(N, n_fine+1, n_p)`` on the fine grid and ``q`` of shape
        ``(N, n_q)``.
        """
        ks = np.atleast_2d(np.asarray(ks, dtype=float))
        dist = self.disturbance_values(seeds)
        states = self._initial_states(ks)
        h = self.fine_dt
        times = self.fine_times
        n_fine = times.size - 1
        positions = np.empty((ks.shape[0], n_fine + 1, self.n_p))
        positions[:, 0] = self._positions_of(states)
        for f in range(n_fine):
            t0 = times[f]
            d = dist[:, f // SUBSTEPS_PER_STEP, :]
            k1 = self._derivative(t0, states, ks, d)
            k2 = self._derivative(t0 + 0.5 * h, states + 0.5 * h * k1, ks, d)
            k3 = self._derivative(t0 + 0.5 * h, states + 0.5 * h * k2, ks, d)
            k4 = self._derivative(t0 + h, states + h * k3, ks, d)
            states = states + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            positions[:, f + 1] = self._positions_of(states)
        return positions, self._final_q_of(states, ks)

    def _cached_rollout(self, k: np.ndarray, seed: int):
        key = (k.tobytes(), int(seed))
        hit = self._rollout_cache.get(key)
        if hit is None:
            positions, q = self.rollout_batch(k[None, :], [seed])
            hit = (positions[0], q[0])
            if len(self._rollout_cache) >= self._CACHE_SIZE:
                self._rollout_cache.pop(next(iter(self._rollout_cache)))
            self._rollout_cache[key] = hit
        return hit

    def evaluate(self, p0, k, t: float, disturbance_seed: int = 0) -> np.ndarray:
        """Workspace position at time ``t`` from start ``p0``."""
        p0 = np.asarray(p0, dtype=float).ravel()
        k = np.asarray(k, dtype=float).ravel()
        if t < -1e-9 or t > self.spec.t_f + 1e-9:
            raise ValueError("query time outside [0, t_f]")
        positions, _ = self._cached_rollout(k, disturbance_seed)
        pos = _interp_fine(positions[None, :, :], self.fine_dt, np.array([t]))[0, 0]
        return pos + p0

    def final_q(self, k, disturbance_seed: int = 0) -> np.ndarray:
        k = np.asarray(k, dtype=float).ravel()
        _, q = self._cached_rollout(k, disturbance_seed)
        return q


def _interp_fine(positions: np.ndarray, fine_dt: float, t_queries: np.ndarray) -> np.ndarray:
    """Linear interpolation of (N, F, n_p) fine-grid positions at shared times."""
    idx = t_queries / fine_dt
    i0 = np.clip(np.floor(idx).astype(int), 0, positions.shape[1] - 2)
    w = np.clip(idx - i0, 0.0, 1.0)
    lo = positions[:, i0, :]
    hi = positions[:, i0 + 1, :]
    return lo + (hi - lo) * w[None, :, None]


class DriftManeuver(BlackBoxSystem):
    """Planar high-speed entry followed by a braking arc ("drift2d").

    The vehicle accelerates from rest along the x-axis toward the entry
    speed ``v`` until the fixed brake time, then speed decays while the
    yaw rate grows with the braking angle ``theta_b`` and the remaining
    speed, producing a wide sliding arc.  No disturbance.
    """

    name = "drift2d"
    spec = TrajectorySpec(n_p=2, n_q=1, t_f=7.8, dt=0.1)
    k_box = Hyperrectangle([9.0, np.pi / 6], [11.0, 2 * np.pi / 9])
    default_p0_box = Hyperrectangle([-1.0, -1.0], [1.0, 1.0])
    disturbance_amplitudes = np.zeros(0)

    BRAKE_TIME = 3.0
    ACCEL_GAIN = 1.2
    BRAKE_DECAY = 0.55
    YAW_GAIN = 0.25

    def _initial_states(self, ks):
        return np.zeros((ks.shape[0], 4))  # x, y, speed, heading

    def _derivative(self, t, states, ks, dist):
        speed = states[:, 2]
        heading = states[:, 3]
        v, theta_b = ks[:, 0], ks[:, 1]
        out = np.empty_like(states)
        out[:, 0] = speed * np.cos(heading)
        out[:, 1] = speed * np.sin(heading)
        if t < self.BRAKE_TIME:
            out[:, 2] = self.ACCEL_GAIN * (v - speed)
            out[:, 3] = 0.0
        else:
            out[:, 2] = -self.BRAKE_DECAY * speed
            out[:, 3] = self.YAW_GAIN * theta_b * speed
        return out

    def _final_q_of(self, states, ks):
        return states[:, 3:4]


class BoatSteering(BlackBoxSystem):
    """Unicycle-like vessel steered toward a relative target ("boat2d").

    The parameter vector is the initial heading and the target point
    relative to the start.  Speed saturates away from the target and
    decays near it; heading turns toward the bearing.  Bounded
    piecewise-constant speed and yaw-rate disturbances act in body frame.
    """

    name = "boat2d"
    spec = TrajectorySpec(n_p=2, n_q=0, t_f=10.0, dt=0.1)
    k_box = Hyperrectangle([-np.pi / 6, 4.0, -1.0], [np.pi / 6, 7.0, 1.0])
    default_p0_box = Hyperrectangle([-1.0, -1.0], [1.0, 1.0])
    disturbance_amplitudes = np.array([0.08, 0.08])  # speed (m/s), yaw rate (rad/s)

    SPEED_MAX = 1.2
    SPEED_GAIN = 1.2
    HEADING_GAIN = 2.2
    STEER_CLIP = 1.2

    def _initial_states(self, ks):
        states = np.zeros((ks.shape[0], 3))  # x, y, heading
        states[:, 2] = ks[:, 0]
        return states

    def _derivative(self, t, states, ks, dist):
        dx = ks[:, 1] - states[:, 0]
        dy = ks[:, 2] - states[:, 1]
        distance = np.hypot(dx, dy)
        heading = states[:, 2]
        bearing = np.arctan2(dy, dx)
        # wrapped-and-clipped heading error: no dead zone when the target
        # sits directly behind, so overshoots turn around immediately
        err = np.arctan2(np.sin(bearing - heading), np.cos(bearing - heading))
        steer = np.where(distance > 1e-9, np.clip(err, -self.STEER_CLIP, self.STEER_CLIP), 0.0)
        # forward speed gated by the facing angle: the boat slows to rotate
        # instead of sailing past the target, which keeps the parameter-to-
        # trajectory map free of turnaround branching
        facing = np.maximum(np.cos(err), 0.0)
        speed = self.SPEED_MAX * np.tanh(self.SPEED_GAIN * distance) * facing + dist[:, 0]
        out = np.empty_like(states)
        out[:, 0] = speed * np.cos(heading)
        out[:, 1] = speed * np.sin(heading)
        out[:, 2] = self.HEADING_GAIN * steer + dist[:, 1]
        return out


_BUILTINS = {cls.name: cls for cls in (DriftManeuver, BoatSteering)}


def builtin(name: str) -> BlackBoxSystem:
    """Instantiate a built-in system by name ("drift2d" or "boat2d")."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown system {name!r}; available: {sorted(_BUILTINS)}") from None


@dataclass
class Dataset:
    """Collected feature/label rows plus generation metadata."""

    features: np.ndarray
    labels: np.ndarray
    spec: TrajectorySpec
    system: str
    seed: int
    n_traj: int
    meta: dict = field(default_factory=dict)

    def to_training_set(self) -> TrainingSet:
        return TrainingSet(
            features=self.features,
            labels=self.labels,
            t_f=self.spec.t_f,
            dt=self.spec.dt,
            n_p=self.spec.n_p,
            n_q=self.spec.n_q,
            meta={"system": self.system, "seed": self.seed},
        )

    def column_names(self) -> list[str]:
        cols = [f"k{j + 1}" for j in range(self.features.shape[1])]
        for s in range(1, self.spec.n_steps + 1):
            cols.extend(f"p{j + 1}_s{s}" for j in range(self.spec.n_p))
        cols.extend(f"q{j + 1}" for j in range(self.spec.n_q))
        return cols

    def save(self, path) -> None:
        """Columnar JSON plus a ``<path>.meta.json`` sidecar."""
        rows = np.hstack([self.features, self.labels])
        with open(path, "w") as f:
            json.dump({"columns": self.column_names(), "rows": rows.tolist()}, f)
        meta = {
            "system": self.system,
            "seed": self.seed,
            "n_traj": self.n_traj,
            "spec": self.spec.to_dict(),
            **self.meta,
        }
        with open(str(path) + ".meta.json", "w") as f:
            json.dump(meta, f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path) as f:
            payload = json.load(f)
        with open(str(path) + ".meta.json") as f:
            meta = json.load(f)
        spec = TrajectorySpec.from_dict(meta["spec"])
        rows = np.array(payload["rows"], dtype=float)
        n_k = sum(1 for c in payload["columns"] if c.startswith("k"))
        extra = {k: v for k, v in meta.items() if k not in ("system", "seed", "n_traj", "spec")}
        return cls(
            features=rows[:, :n_k],
            labels=rows[:, n_k:],
            spec=spec,
            system=meta["system"],
            seed=meta["seed"],
            n_traj=meta["n_traj"],
            meta=extra,
        )


def collect(
    system: BlackBoxSystem,
    k_box: Hyperrectangle,
    n_traj: int,
    spec: TrajectorySpec,
    seed: int,
    chunk: int = 4096,
) -> Dataset:
    """Sample parameters uniformly and record origin-started rollouts.

    One fresh disturbance seed per row; labels are the fine-grid positions
    read off at ``dt, 2 dt, ..., t_f`` followed by the extra goal states.
    Deterministic per seed.
    """
    if n_traj < 1:
        raise ValueError("need n_traj >= 1")
    if spec != system.spec:
        raise ValueError("spec disagrees with the system's trajectory layout")
    ks = sample_uniform(k_box, n_traj, derive_seed(seed, 1))
    dseeds = np.array([derive_seed(seed, 2, i) for i in range(n_traj)], dtype=np.uint64)
    label_idx = np.arange(1, spec.n_steps + 1) * SUBSTEPS_PER_STEP
    labels = np.empty((n_traj, spec.label_dim))
    for lo in range(0, n_traj, chunk):
        hi = min(lo + chunk, n_traj)
        positions, q = system.rollout_batch(ks[lo:hi], dseeds[lo:hi])
        body = positions[:, label_idx, :].reshape(hi - lo, -1)
        labels[lo:hi] = np.hstack([body, q]) if spec.n_q else body
    return Dataset(
        features=ks,
        labels=labels,
        spec=spec,
        system=system.name,
        seed=seed,
        n_traj=n_traj,
    )
