from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

TOL = 1e-9


class SimplexError(ValueError):
    pass


class Infeasible(SimplexError):
    def __init__(self, message: str, residual: np.ndarray):
        super().__init__(message)
        self.residual = residual


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T: np.ndarray, basis: List[int], ncols: int, max_iter: int) -> int:
    """Bland's rule: lowest-index entering column, lowest-index leaving basic variable."""
    m = T.shape[0] - 1
    it = 0
    while True:
        costs = T[m, :ncols]
        entering = next((j for j in range(ncols) if costs[j] < -TOL), None)
        if entering is None:
            return it
        column = T[:m, entering]
        best: Optional[int] = None
        best_ratio = np.inf
        for i in range(m):
            if column[i] > TOL:
                ratio = T[i, -1] / column[i]
                if ratio < best_ratio - TOL or (abs(ratio - best_ratio) <= TOL and basis[i] < basis[best]):
                    best, best_ratio = i, ratio
        if best is None:
            raise SimplexError("objective is unbounded below")
        _pivot(T, best, entering)
        basis[best] = entering
        it += 1
        if it > max_iter:
            raise SimplexError(f"no convergence after {max_iter} pivots")


def simplex_min(c, A_eq, b_eq, max_iter: int = 100_000) -> LPResult:
    """Minimize c @ x subject to A_eq @ x = b_eq, x >= 0, by a two-phase dense tableau."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: artificial basis, minimize their sum
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    it = _run(T, basis, n + m, max_iter)
    if -T[m, -1] > TOL * max(1.0, b.sum()):
        residual = np.zeros(m)
        for i, bv in enumerate(basis):
            if bv >= n:
                residual[bv - n] = T[i, -1]
        raise Infeasible(f"constraints cannot be met (phase-one value {-T[m, -1]:.3g})", residual)

    # drive zero-level artificials out; rows with no original entry are redundant
    keep = []
    for i, bv in enumerate(basis):
        if bv < n:
            keep.append(i)
            continue
        col = next((j for j in range(n) if abs(T[i, j]) > TOL), None)
        if col is not None:
            _pivot(T, i, col)
            basis[i] = col
            keep.append(i)
    rows = T[keep][:, list(range(n)) + [n + m]]
    basis = [basis[i] for i in keep]

    # phase 2
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1] = rows
    T2[-1, :n] = c
    for i, bv in enumerate(basis):
        T2[-1] -= c[bv] * T2[i]
    it += _run(T2, basis, n, max_iter)
    x = np.zeros(n)
    for i, bv in enumerate(basis):
        x[bv] = T2[i, -1]
    x[np.abs(x) < TOL] = 0.0
    return LPResult(x=x, objective=float(c @ x), iterations=it)
