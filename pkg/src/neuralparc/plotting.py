"""Diagnostic SVG plots of solve results (2-D workspaces only).

Plots are diagnostics, never acceptance inputs: red obstacles (light red
once buffered by the agent body), the green goal projection, the dashed
predicted trajectory of the first certified sample, the per-interval
error-bound tube around it, and a few solid black-box rollouts when the
system is available.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Polygon as MplPolygon
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .bounds import ErrorBounds, PartitionedBounds
from .hpoly import HPolytope, buffer_agent_body, chebyshev_center
from .reachavoid import Scenario, SolveReport
from .seeding import derive_seed
from .trajectory import predict

plt.rcParams["svg.hashsalt"] = "neuralparc"


def _polygon_vertices(poly: HPolytope) -> np.ndarray | None:
    """Vertices of a bounded 2-D polytope, ordered for drawing."""
    try:
        center, radius = chebyshev_center(poly)
    except ValueError:
        return None
    if radius <= 1e-12:
        return None
    halfspaces = np.hstack([poly.A, -poly.b[:, None]])
    try:
        hs = HalfspaceIntersection(halfspaces, center)
        pts = hs.intersections
        hull = ConvexHull(pts)
        return pts[hull.vertices]
    except Exception:
        return None


def _project_vertices(poly: HPolytope, n_p: int) -> np.ndarray | None:
    """Workspace projection of a bounded goal polytope, as a 2-D polygon."""
    if poly.dim == n_p:
        return _polygon_vertices(poly)
    try:
        center, radius = chebyshev_center(poly)
    except ValueError:
        return None
    if radius <= 1e-12:
        return None
    halfspaces = np.hstack([poly.A, -poly.b[:, None]])
    try:
        hs = HalfspaceIntersection(halfspaces, center)
        pts2 = hs.intersections[:, :n_p]
        hull = ConvexHull(pts2)
        return pts2[hull.vertices]
    except Exception:
        return None


def _add_patch(ax, verts, **kwargs):
    if verts is not None and len(verts) >= 3:
        ax.add_patch(MplPolygon(verts, closed=True, **kwargs))


def plot_solve(
    scenario: Scenario,
    report: SolveReport,
    bounds,
    net=None,
    system=None,
    n_rollouts: int = 5,
    path: str = "plot.svg",
) -> bool:
    """Write the diagnostic SVG; returns False when nothing can be drawn."""
    if scenario.spec.n_p != 2:
        return False
    fig, ax = plt.subplots(figsize=(7, 6))

    for obs in scenario.obstacle_polys:
        buffered = buffer_agent_body(obs, scenario.agent_radius)
        _add_patch(ax, _polygon_vertices(buffered), facecolor="mistyrose", edgecolor="none")
        _add_patch(ax, _polygon_vertices(obs), facecolor="red", edgecolor="darkred", alpha=0.8)
    _add_patch(
        ax,
        _project_vertices(scenario.goal_poly, 2),
        facecolor="palegreen",
        edgecolor="green",
        alpha=0.8,
    )

    sample = report.first_sample
    if sample is not None and net is not None:
        traj, _ = predict(net, scenario.spec, sample.p0, sample.k)
        cell_bounds = (
            bounds.lookup(sample.k) if isinstance(bounds, PartitionedBounds) else bounds
        )
        if isinstance(cell_bounds, ErrorBounds):
            for s in range(scenario.spec.n_steps):
                e = cell_bounds.e_interval[s]
                corners = np.array(
                    [[-e[0], -e[1]], [e[0], -e[1]], [e[0], e[1]], [-e[0], e[1]]]
                )
                cloud = np.vstack([traj[s] + corners, traj[s + 1] + corners])
                try:
                    hull = ConvexHull(cloud)
                    _add_patch(
                        ax, cloud[hull.vertices], facecolor="gold", alpha=0.25, edgecolor="none"
                    )
                except Exception:
                    pass
        ax.plot(traj[:, 0], traj[:, 1], "k--", lw=1.2, label="predicted")
        ax.plot(*sample.p0, "k^", ms=6)
        if system is not None:
            seeds = [derive_seed(report.seed, 77, r) for r in range(n_rollouts)]
            ks = np.repeat(sample.k[None, :], n_rollouts, axis=0)
            positions, _ = system.rollout_batch(ks, seeds)
            for r in range(n_rollouts):
                ax.plot(
                    positions[r, :, 0] + sample.p0[0],
                    positions[r, :, 1] + sample.p0[1],
                    lw=0.8,
                    alpha=0.9,
                )

    ax.set_aspect("equal", adjustable="datalim")
    ax.autoscale_view()
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"solve outcome: {report.outcome} ({report.n_regions} regions)")
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True
