"""Dense complex linear solves for the semispray saddle systems.

This is a plain LU factorization with partial (row) pivoting, written out
directly because the solver contract needs an explicit relative pivot
threshold: a pivot smaller than 1e-12 times the largest entry of the
input matrix is treated as a rank deficiency rather than silently divided
by.  Matrices here are tiny (a handful of rows), so clarity wins over
performance tricks.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

PIVOT_RTOL = 1e-12


class SingularMatrixError(Exception):
    """Elimination hit a pivot below the relative threshold.

    ``condition_estimate`` is the ratio of the largest entry of the input
    matrix to the absolute value of the failing pivot (infinite for an
    exactly zero pivot); it gives the order of magnitude by which the
    matrix fails the threshold.
    """

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


def lu_factor(matrix: np.ndarray) -> Tuple[np.ndarray, List[int], float]:
    """Factor ``matrix`` in place on a copy; returns (LU, perm, scale).

    ``scale`` is the largest absolute entry of the input, against which
    pivots were compared.  Raises :class:`SingularMatrixError` on a pivot
    below ``PIVOT_RTOL * scale``.
    """
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = float(np.max(np.abs(a))) if n else 0.0
    threshold = PIVOT_RTOL * scale
    perm: List[int] = list(range(n))
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = abs(a[pivot_row, k])
        if pivot <= threshold or pivot == 0.0:
            cond = np.inf if pivot == 0.0 else scale / pivot
            raise SingularMatrixError(
                f"pivot {pivot:.3e} below threshold at elimination step {k}", cond
            )
        if pivot_row != k:
            a[[k, pivot_row]] = a[[pivot_row, k]]
            perm[k], perm[pivot_row] = perm[pivot_row], perm[k]
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return a, perm, scale


def lu_solve(lu: np.ndarray, perm: List[int], rhs: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    x = np.asarray(rhs, dtype=complex)[perm].copy()
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` with partial pivoting."""
    lu, perm, _ = lu_factor(matrix)
    return lu_solve(lu, perm, rhs)


def assert_nonsingular(matrix: np.ndarray) -> None:
    """Raise :class:`SingularMatrixError` if elimination would break down."""
    lu_factor(matrix)


def condition_estimate(matrix: np.ndarray) -> float:
    """1-norm condition estimate via the explicit inverse (small matrices)."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    try:
        lu, perm, _ = lu_factor(a)
    except SingularMatrixError as err:
        return err.condition_estimate
    inv = np.empty((n, n), dtype=complex)
    eye = np.eye(n, dtype=complex)
    for j in range(n):
        inv[:, j] = lu_solve(lu, perm, eye[:, j])
    norm = np.max(np.sum(np.abs(a), axis=0)) if n else 0.0
    inv_norm = np.max(np.sum(np.abs(inv), axis=0)) if n else 0.0
    return float(norm * inv_norm)
