"""Lawson-Hanson active-set non-negative least squares.

Solves ``min ||A x - b||_2  s.t.  x >= 0``.  The passive-set subproblems are
solved through the normal equations ``A_P^T A_P z = A_P^T b``; the Cholesky
factor of ``A_P^T A_P`` is extended by one row when a variable enters the
passive set and rebuilt when variables leave it, so a run with ``k`` passive
variables costs ``O(k^2)`` per step instead of ``O(k^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SolverStall


@dataclass
class NnlsResult:
    x: np.ndarray
    residual: float
    iterations: int


class _PassiveCholesky:
    """Cholesky factor of ``G[P][:, P]`` for an ordered passive set ``P``."""

    def __init__(self, G):
        self.G = G
        self.P: list[int] = []
        self.L = np.zeros((0, 0))

    def rebuild(self, P):
        self.P = list(P)
        if not self.P:
            self.L = np.zeros((0, 0))
            return True
        try:
            self.L = linalg.cholesky(self.G[np.ix_(self.P, self.P)], lower=True, check_finite=False)
        except linalg.LinAlgError:
            return False
        return True

    def append(self, j) -> bool:
        k = len(self.P)
        g = self.G[self.P, j] if k else np.zeros(0)
        row = linalg.solve_triangular(self.L, g, lower=True, check_finite=False) if k else g
        d2 = self.G[j, j] - row @ row
        if not d2 > 1e-14 * self.G[j, j]:
            # column j is numerically dependent on the passive columns
            return False
        L = np.zeros((k + 1, k + 1))
        L[:k, :k] = self.L
        L[k, :k] = row
        L[k, k] = np.sqrt(d2)
        self.L = L
        self.P.append(j)
        return True

    def solve(self, rhs):
        y = linalg.solve_triangular(self.L, rhs, lower=True, check_finite=False)
        return linalg.solve_triangular(self.L.T, y, lower=False, check_finite=False)


def nnls(A, b, max_iter: int | None = None, tol: float | None = None, polish: bool = True) -> NnlsResult:
    """Non-negative least squares by the Lawson-Hanson active-set method.

    Parameters
    ----------
    A : array, (M, N)
    b : array, (M,)
    max_iter : int, optional
        Cap on the total number of passive-set solves; defaults to ``10 N``.
    tol : float, optional
        Dual-feasibility tolerance on the gradient ``A^T (b - A x)``.
    polish : bool
        Re-solve the final passive set with a QR-based least-squares solve,
        which avoids the squared conditioning of the normal equations.  The
        polished point is kept only if it stays strictly positive and does
        not increase the residual.

    Raises
    ------
    SolverStall
        If the iteration cap is exceeded.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    M, N = A.shape
    max_iter = 10 * N if max_iter is None else max_iter
    G = A.T @ A
    c = A.T @ b
    if tol is None:
        tol = 10 * max(M, N) * np.finfo(float).eps * max(np.abs(G).max(initial=0.0), np.abs(c).max(initial=0.0))

    x = np.zeros(N)
    passive = np.zeros(N, dtype=bool)
    # columns refused because they are dependent on the current passive set
    refused = np.zeros(N, dtype=bool)
    chol = _PassiveCholesky(G)
    it = 0
    while True:
        w = c - G @ x
        candidates = ~passive & ~refused
        if not candidates.any() or w[candidates].max() <= tol:
            break
        j = int(np.flatnonzero(candidates)[np.argmax(w[candidates])])
        if not chol.append(j):
            refused[j] = True
            continue
        passive[j] = True

        first = True
        while True:
            it += 1
            if it > max_iter:
                raise SolverStall(f"NNLS exceeded {max_iter} iterations")
            P = np.array(chol.P)
            z = chol.solve(c[P])
            if first and z[-1] <= 0:
                # the entering variable cannot move off zero; drop it
                passive[j] = False
                refused[j] = True
                chol.P.pop()
                chol.L = chol.L[:-1, :-1]
                break
            first = False
            if np.all(z > 0):
                x[:] = 0.0
                x[P] = z
                break
            neg = z <= 0
            xp = x[P]
            alpha = np.min(xp[neg] / (xp[neg] - z[neg]))
            x[P] = xp + alpha * (z - xp)
            # variables driven to (or below) zero by the interpolation step leave
            leaving = P[x[P] <= 0.0]
            if leaving.size == 0:
                # alpha hit a boundary only up to rounding; drop the blocking index
                leaving = P[neg][np.argmin(xp[neg] / (xp[neg] - z[neg]))][None]
            x[leaving] = 0.0
            passive[leaving] = False
            keep = [p for p in chol.P if passive[p]]
            if not chol.rebuild(keep):
                raise SolverStall("passive-set normal equations lost positive definiteness")
        if passive[j]:
            refused[:] = False

    residual = float(np.linalg.norm(A @ x - b))
    P = np.flatnonzero(x > 0)
    if polish and P.size:
        z = linalg.lstsq(A[:, P], b, lapack_driver="gelsy", check_finite=False)[0]
        if np.all(z > 0):
            xz = np.zeros(N)
            xz[P] = z
            rz = float(np.linalg.norm(A @ xz - b))
            if rz <= residual * (1 + 1e-12) + 1e-300:
                x, residual = xz, rz
    return NnlsResult(x, residual, it)
