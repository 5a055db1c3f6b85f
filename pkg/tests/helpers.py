"""Independent oracles used across the test suite.

Everything here stays deliberately independent of the package's
implementation paths: vertex enumeration is brute-force over row
combinations, membership checks are direct inequality evaluations, and
LP-based oracles build their own scipy calls.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def brute_force_vertices(A, b, tol=1e-9):
    """All vertices of {x | Ax <= b} by enumerating row combinations.

    Only for small instances (test oracle): solves every n-subset of rows
    and keeps intersection points satisfying all constraints.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    vertices = []
    for rows in itertools.combinations(range(A.shape[0]), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if (A @ x <= b + tol).all():
            vertices.append(x)
    if not vertices:
        return np.zeros((0, n))
    out = []
    for v in vertices:
        if not any(np.linalg.norm(v - w) < 1e-8 for w in out):
            out.append(v)
    return np.array(out)


def random_bounded_hpoly(rng, dim, n_extra=4, radius=2.0):
    """A random bounded polytope: a box with extra random cuts through it."""
    A = np.vstack([np.eye(dim), -np.eye(dim)])
    b = np.full(2 * dim, radius)
    for _ in range(n_extra):
        a = rng.standard_normal(dim)
        a /= np.linalg.norm(a)
        offset = rng.uniform(0.2, radius)
        A = np.vstack([A, a])
        b = np.append(b, offset)
    return A, b


def lp_feasible_oracle(A, b):
    """Feasibility via a fresh scipy call (independent of the package)."""
    res = linprog(
        c=np.zeros(A.shape[1]),
        A_ub=A,
        b_ub=b,
        bounds=[(None, None)] * A.shape[1],
        method="highs",
    )
    return res.status == 0


def lp_lift_member(A, b, y, m, tol=1e-9):
    """Projection membership: does some x in {Ax <= b} have x[:m] == y?"""
    n = A.shape[1]
    eye = np.zeros((m, n))
    eye[:, :m] = np.eye(m)
    A_aug = np.vstack([A, eye, -eye])
    b_aug = np.concatenate([b, y + tol, -np.asarray(y) + tol])
    return lp_feasible_oracle(A_aug, b_aug)


def segment_hits_box(p_a, p_b, lower, upper, n=512):
    """Dense sampling collision check of a segment against a box."""
    ts = np.linspace(0.0, 1.0, n)
    pts = p_a[None, :] + (p_b - p_a)[None, :] * ts[:, None]
    return bool(((pts >= lower) & (pts <= upper)).all(axis=1).any())
