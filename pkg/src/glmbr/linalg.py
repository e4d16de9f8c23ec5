"""Dense weighted least squares and leverage computations.

The solver works on the QR decomposition (with column pivoting) of
W^{1/2} X rather than the normal equations, which keeps it usable with the
near-degenerate weights that show up close to data separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

__all__ = ["WlsSolution", "RankDeficientError", "wls_solve", "hat_diagonals",
           "htilde_diagonals"]

RANK_TOL = 1e-10  # relative to the largest pivot


class RankDeficientError(ValueError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"design column {column} is aliased (rank deficient)")


@dataclass
class WlsSolution:
    coefficients: np.ndarray   # p
    xtwx_inverse: np.ndarray   # p x p
    hat: np.ndarray            # n


def _weighted_qr(X: np.ndarray, w: np.ndarray):
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if n < p:
        raise ValueError(f"need at least as many rows ({n}) as columns ({p})")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    sw = np.sqrt(w)
    Q, R, piv = sla.qr(sw[:, None] * X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or np.any(diag < RANK_TOL * diag[0]):
        k = int(np.argmax(diag < RANK_TOL * max(diag[0], np.finfo(float).tiny)))
        raise RankDeficientError(int(piv[k]))
    return Q, R, piv, sw


def wls_solve(X: np.ndarray, w: np.ndarray, z: np.ndarray) -> WlsSolution:
    """Solve min_b sum_i w_i (z_i - x_i^T b)^2 via pivoted QR.

    Returns the coefficients, (X^T W X)^{-1} and the hat diagonal in one go;
    the fitting loops need all three every sweep.
    """
    Q, R, piv, sw = _weighted_qr(X, w)
    p = X.shape[1]
    z = np.asarray(z, dtype=float)
    beta_piv = sla.solve_triangular(R, Q.T @ (sw * z))
    beta = np.empty(p)
    beta[piv] = beta_piv
    rinv = sla.solve_triangular(R, np.eye(p))
    inv = np.empty((p, p))
    inv[np.ix_(piv, piv)] = rinv @ rinv.T
    return WlsSolution(coefficients=beta, xtwx_inverse=inv,
                       hat=np.einsum("ij,ij->i", Q, Q))


def hat_diagonals(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Diagonal of H = X (X^T W X)^{-1} X^T W."""
    Q, _, _, _ = _weighted_qr(X, w)
    return np.einsum("ij,ij->i", Q, Q)


def htilde_diagonals(X: np.ndarray, w: np.ndarray, j: int) -> np.ndarray:
    """Diagonal of X K_j X^T W for the rank-one K_j built from column j.

    K_j = c_j c_j^T / c_jj with c_j the j-th column of (X^T W X)^{-1}; the
    returned vector sums to one for full-rank X.
    """
    X = np.asarray(X, dtype=float)
    sol = wls_solve(X, w, np.zeros(X.shape[0]))
    cj = sol.xtwx_inverse[:, j]
    cjj = sol.xtwx_inverse[j, j]
    if cjj <= 0.0:
        raise ValueError(f"nonpositive diagonal {cjj} at coordinate {j}")
    t = X @ cj
    return np.asarray(w, dtype=float) * t**2 / cjj
