"""Detection of complete and quasi-complete separation in binomial models.

A direction gamma separates the data when (2y_i - 1) x_i' gamma >= 0 for all
rows with strict inequality somewhere; it separates completely when the
inequality is strict everywhere.  The detector solves a linear program that
maximises the number of strictly satisfied margins under a box constraint,
then a second program that maximises the smallest margin over the found
support to tell complete from quasi-complete apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

__all__ = ["SeparationReport", "detect_separation", "lp_solve"]

MARGIN_TOL = 1e-9


@dataclass
class SeparationReport:
    separated: bool
    kind: str                      # "none", "quasi" or "complete"
    direction: np.ndarray | None   # separating gamma, max-norm <= 1
    margins: np.ndarray | None     # (2y-1) x' gamma per expanded row
    n_strict: int = 0
    n_rows: int = 0
    notes: list[str] = field(default_factory=list)


def lp_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    """Minimise c'x subject to the given constraints; raises on failure."""
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    return res


def _expand_binary_rows(X: np.ndarray, y: np.ndarray,
                        m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand proportion rows into Bernoulli rows with signs 2y-1.

    A row with 0 < y < 1 contributes both a success and a failure copy, so
    no direction can strictly separate it; rows with y exactly 0 or 1
    contribute a single signed copy.
    """
    rows, signs = [], []
    for i in range(X.shape[0]):
        successes = y[i] * m[i]
        if successes > MARGIN_TOL:
            rows.append(X[i])
            signs.append(1.0)
        if m[i] - successes > MARGIN_TOL:
            rows.append(X[i])
            signs.append(-1.0)
    return np.asarray(rows), np.asarray(signs)


def detect_separation(X, y, m=None) -> SeparationReport:
    """Report whether a binomial design admits a separating direction."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    m = np.ones(n) if m is None else np.asarray(m, dtype=float)
    if y.shape != (n,) or m.shape != (n,):
        raise ValueError("y and m must have one entry per row of X")
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValueError("responses must be proportions in [0, 1]")

    rows, signs = _expand_binary_rows(X, y, m)
    k = rows.shape[0]
    sx = signs[:, None] * rows     # margins are sx @ gamma

    # Maximise sum(s) with s_i <= margins_i, 0 <= s_i <= 1, |gamma_j| <= 1,
    # and margins_i >= 0 so only valid separating directions are searched.
    # Variables: [gamma (p), s (k)].
    c = np.concatenate([np.zeros(p), -np.ones(k)])
    A_ub = np.vstack([np.hstack([-sx, np.eye(k)]),
                      np.hstack([-sx, np.zeros((k, k))])])
    b_ub = np.zeros(2 * k)
    bounds = [(-1.0, 1.0)] * p + [(0.0, 1.0)] * k
    res = lp_solve(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    gamma = res.x[:p]
    margins = sx @ gamma
    n_strict = int(np.sum(margins > MARGIN_TOL))

    if n_strict == 0:
        return SeparationReport(separated=False, kind="none", direction=None,
                                margins=None, n_strict=0, n_rows=k)

    # Second program: maximise the smallest margin t subject to
    # t <= margin_i for every row; a positive optimum means every row can be
    # strictly separated at once (complete), otherwise quasi-complete.
    c2 = np.concatenate([np.zeros(p), [-1.0]])
    A2 = np.hstack([-sx, np.ones((k, 1))])
    res2 = lp_solve(c2, A_ub=A2, b_ub=np.zeros(k),
                    bounds=[(-1.0, 1.0)] * p + [(0.0, None)])
    gamma2 = res2.x[:p]
    margins2 = sx @ gamma2
    complete = bool(np.all(margins2 > MARGIN_TOL))
    if complete:
        gamma, margins = gamma2, margins2
        n_strict = k
    kind = "complete" if complete else "quasi"
    report = SeparationReport(separated=True, kind=kind, direction=gamma,
                              margins=margins, n_strict=n_strict, n_rows=k)
    if kind == "quasi":
        report.notes.append(
            "some rows lie exactly on the separating hyperplane")
    return report
