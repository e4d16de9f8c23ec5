"""Wald-type inference, the adjusted score statistic and the normal-model
confidence-interval calculus.

Standard errors always come from the inverse expected information evaluated
at the fitted values, whichever estimation method produced them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import engine
from .engine import FitControl, FitResult, ModelSpec
from .linalg import wls_solve
from . import families as fam

__all__ = ["InformationMatrix", "IntervalSet", "expected_information",
           "wald_interval", "transform_exp", "adjusted_score_statistic",
           "normal_intervals", "ci_inclusion_check", "quantile"]


@dataclass
class InformationMatrix:
    beta_block: np.ndarray        # p x p, X^T W X / phi
    phi_entry: float | None       # sum(m^2 a'') / (2 phi^4), None if fixed

    def inverse(self) -> np.ndarray:
        inv_beta = np.linalg.inv(self.beta_block)
        if self.phi_entry is None:
            return inv_beta
        p = inv_beta.shape[0]
        out = np.zeros((p + 1, p + 1))
        out[:p, :p] = inv_beta
        out[p, p] = 1.0 / self.phi_entry
        return out


@dataclass
class IntervalSet:
    kind: str          # hat, star, dagger, exact, or wald
    lower: float
    upper: float
    level: float
    kappa: float | None = None

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def included_in(self, other: "IntervalSet") -> bool:
        return other.lower <= self.lower and self.upper <= other.upper


def expected_information(spec: ModelSpec, beta: np.ndarray,
                         phi: float) -> InformationMatrix:
    state = engine.working_quantities(spec, beta, phi)
    xtwx = spec.X.T @ (state.w[:, None] * spec.X)
    phi_entry = None
    if not spec.dispersion_known:
        _, a2, _ = fam.a_derivatives(spec.family, spec.m, phi)
        phi_entry = float(np.sum(spec.m**2 * a2) / (2.0 * phi**4))
    return InformationMatrix(beta_block=xtwx / phi, phi_entry=phi_entry)


def wald_interval(fit: FitResult, j: int, level: float) -> IntervalSet:
    """estimate_j +- z * SE_j with the plug-in expected-information SE."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    z = quantile("normal", (1.0 + level) / 2.0)
    est = fit.beta[j]
    se = fit.se_beta[j]
    return IntervalSet(kind="wald", lower=est - z * se, upper=est + z * se,
                       level=level)


def transform_exp(fit: FitResult, j: int):
    """Exponentiated coefficient and its delta-method standard error.

    exp of a median-BR estimate is itself the median-BR estimate of the
    exponentiated parameter (componentwise monotone invariance); exp of a
    mean-BR estimate carries no such guarantee.
    """
    psi = float(np.exp(fit.beta[j]))
    return psi, psi * float(fit.se_beta[j])


def adjusted_score_statistic(spec: ModelSpec, psi_index_set, psi0, method: str,
                             control: FitControl | None = None):
    """Score-type test of beta[psi_index_set] = psi0 using adjusted scores.

    The nuisance coefficients solve the nuisance block of the FULL model's
    adjusted score equations with the tested coefficients held at psi0 --
    the adjustment keeps the full-model leverages and dimension, it is not
    the reduced model's own adjustment.  This makes the statistic exactly
    zero at the unconstrained estimate.  The statistic is the quadratic
    form of the adjusted score in the tested block with the corresponding
    block of the inverse expected information at the constrained fit.
    """
    if method not in ("mean_br", "median_br"):
        raise ValueError("method must be mean_br or median_br")
    psi_idx = np.atleast_1d(np.asarray(psi_index_set, dtype=int))
    psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
    p = spec.p
    if psi_idx.size == 0 or psi_idx.size >= p:
        raise ValueError("psi_index_set must be a nonempty proper subset")
    lam_idx = np.array([t for t in range(p) if t not in set(psi_idx.tolist())])

    beta_full, phi = _constrained_fit(spec, psi_idx, lam_idx, psi0, method,
                                      control or FitControl())
    state = engine.working_quantities(spec, beta_full, phi)
    hat = wls_solve(spec.X, state.w, np.zeros(spec.n)).hat
    sb = engine.score_beta(spec, beta_full, phi, state)
    if method == "mean_br":
        ab, _, _ = engine.mean_adjustments(spec, beta_full, phi, hat, state)
    else:
        ab, _, _ = engine.median_adjustments(spec, beta_full, phi, hat, state)
    adj = (sb + ab)[psi_idx]
    info = expected_information(spec, beta_full, phi)
    i_psipsi = np.linalg.inv(info.beta_block)[np.ix_(psi_idx, psi_idx)]
    statistic = float(adj @ i_psipsi @ adj)
    dof = int(psi_idx.size)
    return statistic, dof, float(stats.chi2.sf(statistic, dof))


def _constrained_fit(spec: ModelSpec, psi_idx, lam_idx, psi0, method,
                     control: FitControl):
    """Solve the nuisance block of the full adjusted score at fixed psi0.

    Each sweep evaluates the hat values, xi, u and the dispersion update
    with the full design (all p columns), then solves weighted least
    squares for the nuisance columns only.
    """
    psi_offset = spec.X[:, psi_idx] @ psi0
    sub = ModelSpec(X=spec.X[:, lam_idx], y=spec.y, family=spec.family,
                    link=spec.link, m=spec.m, offset=spec.offset + psi_offset)
    warm = engine.fit(sub, method, FitControl(
        tolerance=max(control.tolerance, 1e-8),
        max_iterations=control.max_iterations))
    lam, phi = warm.beta.copy(), warm.phi

    beta_full = np.empty(spec.p)
    beta_full[psi_idx] = psi0
    tol = control.tolerance
    for _ in range(control.max_iterations):
        beta_full[lam_idx] = lam
        state = engine.working_quantities(spec, beta_full, phi)
        hat = wls_solve(spec.X, state.w, np.zeros(spec.n)).hat
        _, _, xi = engine.mean_adjustments(spec, beta_full, phi, hat, state)
        zadj = state.z - spec.offset - psi_offset + phi * xi
        if method == "median_br":
            u = engine._median_u(spec, state)
            zadj = zadj + phi * (spec.X @ u)
        lam_new = wls_solve(spec.X[:, lam_idx], state.w, zadj).coefficients
        phi_new = phi
        if not spec.dispersion_known:
            _, a2, a3 = fam.a_derivatives(spec.family, spec.m, phi)
            phi_new = engine._phi_update(
                phi, spec.p, float(np.sum(state.q - state.rho)),
                float(np.sum(spec.m**2 * a2)), float(np.sum(spec.m**3 * a3)),
                method, "identity")
        step = float(np.max(np.abs(lam_new - lam))) + abs(phi_new - phi)
        lam, phi = lam_new, phi_new
        if step <= tol * (1.0 + float(np.max(np.abs(lam))) + phi):
            break
    else:
        raise engine.FitError("constrained fit did not converge")
    beta_full[lam_idx] = lam
    return beta_full, phi


def normal_intervals(rss: float, n: int, p: int, kappa: float, level: float,
                     center: float = 0.0) -> dict[str, IntervalSet]:
    """The four normal-linear-model intervals for one coefficient.

    'hat', 'star' and 'dagger' use the normal quantile with the three
    dispersion divisors n, n-p and n-p-2/3; 'exact' uses the Student-t
    quantile with the unbiased divisor.
    """
    if n <= p or rss <= 0.0 or not 0.0 < level < 1.0:
        raise ValueError("need n > p, rss > 0 and level in (0, 1)")
    alpha = 1.0 - level
    z = quantile("normal", 1.0 - alpha / 2.0)
    t = quantile("student_t", 1.0 - alpha / 2.0, df=n - p)
    divisors = {"hat": (z, n), "star": (z, n - p), "dagger": (z, n - p - 2.0 / 3.0),
                "exact": (t, n - p)}
    out = {}
    for kind, (quant, div) in divisors.items():
        half = quant * np.sqrt(kappa * rss / div)
        out[kind] = IntervalSet(kind=kind, lower=center - half,
                                upper=center + half, level=level, kappa=kappa)
    return out


@dataclass
class InclusionCheck:
    nu: int
    alpha: float
    g: float   # > 0 iff the dagger interval sits inside the exact one
    h: float   # > 0 iff the dagger length is closer to the exact length
    hat_in_star: bool
    star_in_exact: bool
    star_in_dagger: bool
    dagger_in_exact: bool
    dagger_len_closer: bool


def ci_inclusion_check(nu: int, alpha: float) -> InclusionCheck:
    """Sign analysis of the interval-inclusion functions g and h."""
    if nu < 1 or not 0.0 < alpha < 1.0:
        raise ValueError("need nu >= 1 and alpha in (0, 1)")
    z = quantile("normal", 1.0 - alpha / 2.0)
    t = quantile("student_t", 1.0 - alpha / 2.0, df=nu)
    g = float(np.sqrt((nu - 2.0 / 3.0) / nu) * t - z)
    h = float(2.0 * t / np.sqrt(nu) - z / np.sqrt(nu - 2.0 / 3.0) - z / np.sqrt(nu))
    return InclusionCheck(nu=nu, alpha=alpha, g=g, h=h,
                          hat_in_star=True, star_in_exact=z <= t,
                          star_in_dagger=True, dagger_in_exact=g > 0.0,
                          dagger_len_closer=h > 0.0)


def quantile(kind: str, prob: float, df: int | None = None) -> float:
    """Inverse CDF for the standard normal, Student t or chi-square."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must be in (0, 1)")
    if kind == "normal":
        return float(stats.norm.ppf(prob))
    if kind == "student_t":
        if df is None or df < 1:
            raise ValueError("student_t needs df >= 1")
        return float(stats.t.ppf(prob, df))
    if kind == "chi_square":
        if df is None or df < 1:
            raise ValueError("chi_square needs df >= 1")
        return float(stats.chi2.ppf(prob, df))
    raise ValueError(f"unknown quantile kind {kind!r}")
