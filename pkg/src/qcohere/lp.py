"""Small dense LP / least-squares solvers used by the decomposition engine.

* ``simplex``: two-phase tableau simplex with Bland's rule, standard form
  ``min c.x  s.t.  A x = b, x >= 0``.
* ``nnls``: Lawson-Hanson active-set nonnegative least squares.
* ``least_distance``: min ||x|| s.t. G x >= h, reduced to NNLS.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    reduced_costs: np.ndarray
    pivots: int


def _pivot(t: np.ndarray, r: int, c: int) -> None:
    t[r] /= t[r, c]
    col = t[:, c].copy()
    col[r] = 0.0
    t -= np.outer(col, t[r])
    t[:, c] = 0.0
    t[r, c] = 1.0


def _bland_loop(t, basis, ncols, tol, piv_tol, max_pivots):
    """Run primal simplex on tableau ``t`` (last row = reduced costs)."""
    m = t.shape[0] - 1
    pivots = 0
    while True:
        rc = t[-1, :ncols]
        candidates = np.flatnonzero(rc < -tol)
        if candidates.size == 0:
            return pivots
        c = int(candidates[0])
        col = t[:m, c]
        rows = np.flatnonzero(col > piv_tol)
        if rows.size == 0:
            raise LPError("objective unbounded below")
        ratios = t[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-13 * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(t, r, c)
        basis[r] = c
        pivots += 1
        if pivots > max_pivots:
            raise LPError("pivot limit exceeded")


def simplex(c, A, b, tol: float = 1e-11) -> LPResult:
    """Solve ``min c.x, A x = b, x >= 0`` with the two-phase method."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    scale = max(1.0, float(np.abs(A).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    piv_tol = 1e-10 * scale
    max_pivots = 50 * (m + n) + 100

    # phase 1: artificials n..n+m-1
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = A
    t[:m, n:n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n] = -A.sum(axis=0)
    t[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    pivots = _bland_loop(t, basis, n + m, tol * scale, piv_tol, max_pivots)
    if -t[-1, -1] > 1e-9 * scale:
        raise LPError(f"infeasible: phase-1 optimum {-t[-1, -1]:.3e}")

    # drive remaining artificials out; rows that cannot be pivoted are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(t[r, :n]) > piv_tol)
            if nz.size:
                _pivot(t, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep[r] = False
    rows = np.flatnonzero(keep)
    t2 = np.zeros((rows.size + 1, n + 1))
    t2[:-1, :n] = t[rows, :n]
    t2[:-1, -1] = t[rows, -1]
    basis = basis[rows]
    # phase 2 objective row: reduced costs c - c_B B^-1 A
    t2[-1, :n] = c - c[basis] @ t2[:-1, :n]
    t2[-1, -1] = -c[basis] @ t2[:-1, -1]
    pivots += _bland_loop(t2, basis, n, tol * scale, piv_tol, max_pivots)

    x = np.zeros(n)
    # refine the basic solution against the original data
    Ab = A[:, basis]
    xb, *_ = np.linalg.lstsq(Ab, b, rcond=None)
    if np.any(xb < -1e-9 * scale) or np.linalg.norm(Ab @ xb - b) > 1e-8 * scale:
        xb = t2[:-1, -1]
    x[basis] = np.maximum(xb, 0.0)
    return LPResult(x, float(c @ x), basis.copy(), t2[-1, :n].copy(), pivots)


def nnls(A, b, max_iter: int | None = None, tol: float | None = None):
    """Lawson-Hanson NNLS: argmin ||A x - b|| subject to x >= 0.

    Returns (x, residual_norm).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 3 * n + 30
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.abs(A).max(initial=0.0)))
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while (~passive).any() and np.max(np.where(passive, -np.inf, w)) > tol:
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                return x, float(np.linalg.norm(A @ x - b))
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx], *_ = np.linalg.lstsq(A[:, idx], b, rcond=None)
            if np.all(z[idx] > tol):
                x = z
                break
            bad = idx[z[idx] <= tol]
            alpha = np.min(x[bad] / (x[bad] - z[bad]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(A @ x - b))


def least_distance(G, h):
    """min ||x|| subject to G x >= h (Lawson-Hanson LDP via NNLS).

    Returns x, or None when the constraints are infeasible.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n = G.shape[1]
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f)
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-12 or abs(r[-1]) <= 1e-14:
        return None
    return -r[:n] / r[-1]
