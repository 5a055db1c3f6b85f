"""Sampled modeling-error bounds between the trajectory model and the system.

The final-error bound is the per-channel maximum absolute gap between
predicted and realized ``[p(t_f); q]`` over all samples; the interval
bound does the same for positions at evenly spaced query times inside
each ``[t, t+dt]``, comparing the model's linear interpolation against
the system's trajectory.  Both are sampled maxima: they upper-bound the
error on the sampled set by construction, and a validation pass on fresh
samples reports how often they are exceeded.  Certification must be
refused when that count is nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hpoly import Hyperrectangle, sample_uniform
from .network import ReluNetwork
from .seeding import derive_seed
from .systems import BlackBoxSystem, _interp_fine
from .trajectory import TrajectorySpec, predict_batch

_CHUNK = 4096


@dataclass
class ErrorBounds:
    """Per-channel worst-case gaps observed over one sample set.

    ``e_final`` has ``n_p + n_q`` entries; ``e_interval`` has one row per
    timestep interval (``n_steps`` rows of ``n_p`` channels) where row
    ``s`` covers query times in ``[s*dt, (s+1)*dt]``.  ``subdomain`` is
    the parameter box the samples were drawn from.
    """

    e_final: np.ndarray
    e_interval: np.ndarray
    n_sample: int
    subdomain: Hyperrectangle

    def __post_init__(self):
        self.e_final = np.asarray(self.e_final, dtype=float).ravel()
        self.e_interval = np.atleast_2d(np.asarray(self.e_interval, dtype=float))
        if (self.e_final < 0).any() or (self.e_interval < 0).any():
            raise ValueError("error bounds must be nonnegative")

    def inflated(self, rel: float = 0.0, floor: float = 0.0) -> "ErrorBounds":
        """A conservatively enlarged copy: grow by ``rel`` plus ``floor``.

        Sampled maxima under-estimate the true supremum, worst where the
        per-channel bound is tiny; a relative margin plus a small absolute
        floor covers both regimes.  Enlarging is sound (certified sets only
        shrink) and is what lets a fresh-sample validation pass report zero
        exceedances.
        """
        if rel < 0 or floor < 0:
            raise ValueError("inflation must be nonnegative")
        return ErrorBounds(
            self.e_final * (1.0 + rel) + floor,
            self.e_interval * (1.0 + rel) + floor,
            self.n_sample,
            self.subdomain,
        )

    def to_dict(self) -> dict:
        return {
            "e_final": self.e_final.tolist(),
            "e_interval": self.e_interval.tolist(),
            "n_sample": self.n_sample,
            "subdomain": self.subdomain.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorBounds":
        return cls(
            e_final=np.array(d["e_final"]),
            e_interval=np.array(d["e_interval"]),
            n_sample=int(d["n_sample"]),
            subdomain=Hyperrectangle.from_dict(d["subdomain"]),
        )


def error_sets(b: ErrorBounds):
    """Origin-centered boxes for the final and per-interval bounds."""
    final_box = Hyperrectangle(-b.e_final, b.e_final)
    interval_boxes = [Hyperrectangle(-row, row) for row in b.e_interval]
    return final_box, interval_boxes


def _sample_inputs(system, p0_box, k_box, n_sample, seed):
    p0s = sample_uniform(p0_box, n_sample, derive_seed(seed, 101))
    ks = sample_uniform(k_box, n_sample, derive_seed(seed, 102))
    dseeds = np.array(
        [derive_seed(seed, 200, i) for i in range(n_sample)], dtype=np.uint64
    )
    return p0s, ks, dseeds


def per_sample_errors(
    system: BlackBoxSystem,
    net: ReluNetwork,
    spec: TrajectorySpec,
    p0s: np.ndarray,
    ks: np.ndarray,
    dseeds: np.ndarray,
    n_substeps: int,
):
    """Final and interval error profiles for one chunk of samples.

    Returns ``(final_err, interval_err)`` of shapes ``(N, n_p+n_q)`` and
    ``(N, n_steps, n_p)``.  The interval profile takes, per interval, the
    max over ``n_substeps`` evenly spaced query times (endpoints included)
    of the absolute gap between the interpolated model position and the
    system position.
    """
    if n_substeps < 2:
        raise ValueError("need n_substeps >= 2")
    model_traj, model_q = predict_batch(net, spec, p0s, ks)
    positions, q = system.rollout_batch(ks, dseeds)
    positions = positions + p0s[:, None, :]

    final_model = np.hstack([model_traj[:, -1, :], model_q])
    final_sys = np.hstack([positions[:, -1, :], q])
    final_err = np.abs(final_model - final_sys)

    S = spec.n_steps
    fracs = np.linspace(0.0, 1.0, n_substeps)
    interval_err = np.empty((p0s.shape[0], S, spec.n_p))
    for s in range(S):
        t_queries = (s + fracs) * spec.dt
        seg = model_traj[:, s + 1, :] - model_traj[:, s, :]
        model_pts = model_traj[:, s, None, :] + seg[:, None, :] * fracs[None, :, None]
        sys_pts = _interp_fine(positions, system.fine_dt, t_queries)
        interval_err[:, s, :] = np.abs(model_pts - sys_pts).max(axis=1)
    return final_err, interval_err


def estimate(
    system: BlackBoxSystem,
    net: ReluNetwork,
    spec: TrajectorySpec,
    p0_box: Hyperrectangle,
    k_box: Hyperrectangle,
    n_sample: int,
    n_substeps: int = 10,
    seed: int = 0,
) -> ErrorBounds:
    """Sampled error bounds over uniform ``(p0, k, disturbance)`` draws.

    Deterministic per seed; disturbance seeds are derived per sample
    index.  Evaluation runs in chunks so memory stays flat.
    """
    if n_sample < 1:
        raise ValueError("need n_sample >= 1")
    p0s, ks, dseeds = _sample_inputs(system, p0_box, k_box, n_sample, seed)
    e_final = np.zeros(spec.n_p + spec.n_q)
    e_interval = np.zeros((spec.n_steps, spec.n_p))
    for lo in range(0, n_sample, _CHUNK):
        hi = min(lo + _CHUNK, n_sample)
        fe, ie = per_sample_errors(
            system, net, spec, p0s[lo:hi], ks[lo:hi], dseeds[lo:hi], n_substeps
        )
        e_final = np.maximum(e_final, fe.max(axis=0))
        e_interval = np.maximum(e_interval, ie.max(axis=0))
    return ErrorBounds(e_final, e_interval, n_sample, k_box)


@dataclass
class PartitionedBounds:
    """Error bounds localized to a grid of parameter-box cells.

    Cells are the ``splits``-per-dimension grid over ``k_box``; each holds
    the bounds computed from the shared sample set restricted to it, so
    every per-cell bound is elementwise at most the global bound.
    """

    k_box: Hyperrectangle
    splits: int
    cells: list[tuple[Hyperrectangle, ErrorBounds]]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_index(self, k) -> int:
        """Which cell contains ``k``; cells are half-open except the last."""
        k = np.asarray(k, dtype=float).ravel()
        if not self.k_box.contains(k, tol=0.0):
            raise ValueError("parameter outside the partitioned box")
        widths = (self.k_box.upper - self.k_box.lower) / self.splits
        safe = np.where(widths > 0, widths, 1.0)
        axes = np.floor((k - self.k_box.lower) / safe).astype(int)
        axes = np.clip(axes, 0, self.splits - 1)
        flat = 0
        for a in axes:
            flat = flat * self.splits + int(a)
        return flat

    def lookup(self, k) -> ErrorBounds:
        return self.cells[self.cell_index(k)][1]

    def global_bounds(self) -> ErrorBounds:
        """Elementwise max over cells == bounds of the union sample set."""
        e_final = np.max([c.e_final for _, c in self.cells], axis=0)
        e_interval = np.max([c.e_interval for _, c in self.cells], axis=0)
        total = sum(c.n_sample for _, c in self.cells)
        return ErrorBounds(e_final, e_interval, total, self.k_box)

    def inflated(self, rel: float = 0.0, floor: float = 0.0) -> "PartitionedBounds":
        """Inflate every cell by the same margins (see ErrorBounds)."""
        return PartitionedBounds(
            k_box=self.k_box,
            splits=self.splits,
            cells=[(box, b.inflated(rel, floor)) for box, b in self.cells],
        )

    def to_dict(self) -> dict:
        return {
            "k_box": self.k_box.to_dict(),
            "splits": self.splits,
            "cells": [
                {"subdomain": box.to_dict(), "bounds": b.to_dict()} for box, b in self.cells
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionedBounds":
        return cls(
            k_box=Hyperrectangle.from_dict(d["k_box"]),
            splits=int(d["splits"]),
            cells=[
                (
                    Hyperrectangle.from_dict(c["subdomain"]),
                    ErrorBounds.from_dict(c["bounds"]),
                )
                for c in d["cells"]
            ],
        )


def _cell_boxes(k_box: Hyperrectangle, splits: int) -> list[Hyperrectangle]:
    edges = [np.linspace(lo, hi, splits + 1) for lo, hi in zip(k_box.lower, k_box.upper)]
    boxes = []
    idx = np.zeros(k_box.dim, dtype=int)
    total = splits**k_box.dim
    for flat in range(total):
        rem = flat
        for j in range(k_box.dim - 1, -1, -1):
            idx[j] = rem % splits
            rem //= splits
        lo = np.array([edges[j][idx[j]] for j in range(k_box.dim)])
        hi = np.array([edges[j][idx[j] + 1] for j in range(k_box.dim)])
        boxes.append(Hyperrectangle(lo, hi))
    return boxes


def partition_and_estimate(
    system: BlackBoxSystem,
    net: ReluNetwork,
    spec: TrajectorySpec,
    p0_box: Hyperrectangle,
    k_box: Hyperrectangle,
    n_sample: int,
    n_substeps: int = 10,
    seed: int = 0,
    splits: int = 1,
) -> PartitionedBounds:
    """Per-cell bounds from one shared sample set over the whole box.

    Draws exactly the samples :func:`estimate` would draw with the same
    seed, assigns each to its cell and takes per-cell maxima; with
    ``splits = 1`` the result carries the identical single-cell bounds.
    Raises if any cell receives no samples.
    """
    if splits < 1:
        raise ValueError("need splits >= 1")
    boxes = _cell_boxes(k_box, splits)
    holder = PartitionedBounds(k_box=k_box, splits=splits, cells=[])
    n_cells = len(boxes)
    e_final = np.zeros((n_cells, spec.n_p + spec.n_q))
    e_interval = np.zeros((n_cells, spec.n_steps, spec.n_p))
    counts = np.zeros(n_cells, dtype=int)

    p0s, ks, dseeds = _sample_inputs(system, p0_box, k_box, n_sample, seed)
    cell_of = np.array([holder.cell_index(k) for k in ks])
    for lo in range(0, n_sample, _CHUNK):
        hi = min(lo + _CHUNK, n_sample)
        fe, ie = per_sample_errors(
            system, net, spec, p0s[lo:hi], ks[lo:hi], dseeds[lo:hi], n_substeps
        )
        for local, cell in enumerate(cell_of[lo:hi]):
            counts[cell] += 1
            np.maximum(e_final[cell], fe[local], out=e_final[cell])
            np.maximum(e_interval[cell], ie[local], out=e_interval[cell])
    if (counts == 0).any():
        raise ValueError(
            f"{int((counts == 0).sum())} cells received no samples; increase n_sample"
        )
    holder.cells = [
        (boxes[c], ErrorBounds(e_final[c], e_interval[c], int(counts[c]), boxes[c]))
        for c in range(n_cells)
    ]
    return holder


@dataclass
class ValidationReport:
    """Exceedance statistics of a bound on fresh samples."""

    n_checked: int
    n_exceeded: int
    max_ratio: float
    seed: int

    @property
    def passed(self) -> bool:
        return self.n_exceeded == 0

    def to_dict(self) -> dict:
        return {
            "n_checked": self.n_checked,
            "n_exceeded": self.n_exceeded,
            "max_ratio": self.max_ratio,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        return cls(int(d["n_checked"]), int(d["n_exceeded"]), float(d["max_ratio"]), int(d["seed"]))


def validate(
    bounds,
    system: BlackBoxSystem,
    net: ReluNetwork,
    spec: TrajectorySpec,
    p0_box: Hyperrectangle,
    k_box: Hyperrectangle,
    n_substeps: int = 10,
    seed: int = 1,
    factor: int = 10,
) -> ValidationReport:
    """Check the bounds against ``factor`` times as many fresh samples.

    ``bounds`` may be :class:`ErrorBounds` or :class:`PartitionedBounds`;
    in the partitioned case each fresh sample is compared against the
    bounds of the cell containing its parameter draw.  A sample counts as
    exceeding when any channel at any checked time beats its bound (with a
    1e-12 absolute float guard).
    """
    partitioned = isinstance(bounds, PartitionedBounds)
    base_n = bounds.global_bounds().n_sample if partitioned else bounds.n_sample
    n = factor * base_n
    p0s, ks, dseeds = _sample_inputs(system, p0_box, k_box, n, derive_seed(seed, 999))
    n_exceeded = 0
    max_ratio = 0.0
    guard = 1e-12
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        fe, ie = per_sample_errors(
            system, net, spec, p0s[lo:hi], ks[lo:hi], dseeds[lo:hi], n_substeps
        )
        for local in range(hi - lo):
            b = bounds.lookup(ks[lo + local]) if partitioned else bounds
            over_final = fe[local] > b.e_final + guard
            over_interval = ie[local] > b.e_interval + guard
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.concatenate(
                    [
                        (fe[local] / np.maximum(b.e_final, guard)).ravel(),
                        (ie[local] / np.maximum(b.e_interval, guard)).ravel(),
                    ]
                )
            max_ratio = max(max_ratio, float(np.nanmax(ratios)))
            if over_final.any() or over_interval.any():
                n_exceeded += 1
    return ValidationReport(n_checked=n, n_exceeded=n_exceeded, max_ratio=max_ratio, seed=seed)
