"""Estimation core: scores, adjustments and the adjusted IWLS loops.

Four estimation methods share one iteration skeleton. Maximum likelihood
solves the plain score equations; the bias-reducing methods solve score
equations with an additive adjustment, implemented as IWLS on an adjusted
working variate:

* mean_br    regresses z + phi*xi,
* median_br  regresses z + phi*xi and then translates the result by phi*u,
* mixed_br   takes the mean_br step for the coefficients and the median_br
             update for the dispersion.

The dispersion updates are the multiplicative quasi-Fisher expressions; a
log-scale variant is available for invariance experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import families as fam
from .families import Family, Link, InvalidMeanError
from .linalg import htilde_diagonals, wls_solve

__all__ = ["ModelSpec", "FitControl", "FitResult", "WorkingState", "FitError",
           "METHODS", "working_quantities", "score_beta", "score_phi",
           "mean_adjustments", "median_adjustments", "fit",
           "explicit_correction", "moment_dispersion"]

METHODS = ("ml", "corrected_ml", "mean_br", "median_br", "mixed_br")

PHI_FLOOR = 1e-6

# |eta| beyond which binomial fitted probabilities are numerically 0 or 1
ETA_BOUNDARY = 20.0


class FitError(RuntimeError):
    """Fit could not proceed (repeated invalid states, bad input)."""


@dataclass
class ModelSpec:
    """A GLM fit problem: design, response, weights, family and link."""

    X: np.ndarray
    y: np.ndarray
    family: Family
    link: Link
    m: np.ndarray | None = None
    offset: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        n, p = self.X.shape
        if n < p:
            raise FitError(f"more columns ({p}) than rows ({n})")
        if self.y.shape != (n,):
            raise FitError("response length does not match the design")
        self.m = np.ones(n) if self.m is None else np.asarray(self.m, dtype=float)
        self.offset = (np.zeros(n) if self.offset is None
                       else np.asarray(self.offset, dtype=float))
        if np.any(self.m <= 0.0):
            raise FitError("prior weights must be positive")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def dispersion_known(self) -> bool:
        return self.family.dispersion_known


@dataclass
class FitControl:
    tolerance: float = 1e-10
    max_iterations: int = 100
    max_step_halvings: int = 10
    beta_start: np.ndarray | None = None
    phi_start: float | None = None
    dispersion_scale: str = "identity"  # or "log": update log(phi) instead

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be > 0 and max_iterations >= 1")
        if self.dispersion_scale not in ("identity", "log"):
            raise ValueError("dispersion_scale must be 'identity' or 'log'")


@dataclass
class WorkingState:
    """Per-observation quantities evaluated at one (beta, phi)."""

    eta: np.ndarray
    mu: np.ndarray
    d: np.ndarray
    d_prime: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray
    q: np.ndarray
    rho: np.ndarray | None  # None when dispersion is known


@dataclass
class FitResult:
    method: str
    beta: np.ndarray
    phi: float
    vcov: np.ndarray
    iterations: int
    converged: bool
    adjusted_score_norm: float
    working_state: dict = field(repr=False, default_factory=dict)

    @property
    def se_beta(self) -> np.ndarray:
        p = len(self.beta)
        return np.sqrt(np.diag(self.vcov)[:p])

    @property
    def se_phi(self) -> float | None:
        p = len(self.beta)
        if self.vcov.shape[0] == p:
            return None
        return float(np.sqrt(self.vcov[p, p]))


def working_quantities(spec: ModelSpec, beta: np.ndarray, phi: float,
                       mu_override: np.ndarray | None = None) -> WorkingState:
    """Evaluate eta, mu, link derivatives, weights, working variate and the
    deviance pair (q, rho) at the given parameters.

    mu_override replaces the linked mean while keeping eta; the multinomial
    rescaling step relies on this hook.
    """
    eta = spec.X @ np.asarray(beta, dtype=float) + spec.offset
    mu, d, dp = fam.link_quantities(spec.link, eta)
    if mu_override is not None:
        mu = np.asarray(mu_override, dtype=float)
        # canonical-link derivative recomputation from the shifted mean
        if spec.link.kind == "log":
            d = mu.copy()
            dp = mu.copy()
        else:
            raise FitError("mean override is only supported with the log link")
    fam._check_mean_domain(spec.family, mu)
    # transiently huge means may overflow; the fit loop's step halving
    # recovers from the resulting non-finite weights
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        v = fam.variance(spec.family, mu)
        w = spec.m * d**2 / v
        z = eta + (spec.y - mu) / d
    q = fam.unit_deviance(spec.family, spec.y, mu, spec.m)
    rho = None
    if not spec.dispersion_known:
        a1, _, _ = fam.a_derivatives(spec.family, spec.m, phi)
        rho = spec.m * a1
    return WorkingState(eta=eta, mu=mu, d=d, d_prime=dp, v=v, w=w, z=z,
                        q=q, rho=rho)


def score_beta(spec: ModelSpec, beta: np.ndarray, phi: float,
               state: WorkingState | None = None) -> np.ndarray:
    """Gradient of the log-likelihood in beta: X^T W D^{-1} (y - mu) / phi."""
    st = state or working_quantities(spec, beta, phi)
    return spec.X.T @ (st.w / st.d * (spec.y - st.mu)) / phi


def score_phi(spec: ModelSpec, beta: np.ndarray, phi: float,
              state: WorkingState | None = None) -> float:
    """Dispersion score: sum(q - rho) / (2 phi^2)."""
    if spec.dispersion_known:
        raise fam.UnsupportedFamilyError("dispersion is fixed for this family")
    st = state or working_quantities(spec, beta, phi)
    return float(np.sum(st.q - st.rho) / (2.0 * phi**2))


def mean_adjustments(spec: ModelSpec, beta: np.ndarray, phi: float,
                     hat: np.ndarray, state: WorkingState | None = None):
    """Mean bias-reducing adjustment: (A_beta, A_phi, xi).

    A_beta = X^T W xi with xi_i = h_i d'_i / (2 d_i w_i); A_phi is None for
    fixed-dispersion families.
    """
    st = state or working_quantities(spec, beta, phi)
    if np.any(st.d == 0.0):
        raise FitError("flat link (d = 0) at some observation")
    xi = hat * st.d_prime / (2.0 * st.d * st.w)
    a_beta = spec.X.T @ (st.w * xi)
    a_phi = None
    if not spec.dispersion_known:
        _, a2, a3 = fam.a_derivatives(spec.family, spec.m, phi)
        s2 = np.sum(spec.m**2 * a2)
        s3 = np.sum(spec.m**3 * a3)
        a_phi = (spec.p - 2) / (2.0 * phi) + s3 / (2.0 * phi**2 * s2)
    return a_beta, a_phi, xi


def _median_core(spec: ModelSpec, st: WorkingState) -> np.ndarray:
    vp = fam.variance_derivative(spec.family, st.mu)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return st.d * vp / (6.0 * st.v) - st.d_prime / (2.0 * st.d)


def _median_u(spec: ModelSpec, st: WorkingState) -> np.ndarray:
    core = _median_core(spec, st)
    sol = wls_solve(spec.X, st.w, np.zeros(spec.n))
    inv = sol.xtwx_inverse
    u = np.empty(spec.p)
    for j in range(spec.p):
        cj = inv[:, j]
        htilde = st.w * (spec.X @ cj) ** 2 / inv[j, j]
        u[j] = cj @ (spec.X.T @ (htilde * core))
    return u


def median_adjustments(spec: ModelSpec, beta: np.ndarray, phi: float,
                       hat: np.ndarray, state: WorkingState | None = None):
    """Median bias-reducing adjustment: (A_beta, A_phi, u).

    A_beta = X^T W (xi + X u); the per-coordinate u_j mixes the leverage-like
    htilde diagonals with the d V'/(6V) - d'/(2d) core.
    """
    st = state or working_quantities(spec, beta, phi)
    _, _, xi = mean_adjustments(spec, beta, phi, hat, st)
    u = _median_u(spec, st)
    a_beta = spec.X.T @ (st.w * (xi + spec.X @ u))
    a_phi = None
    if not spec.dispersion_known:
        _, a2, a3 = fam.a_derivatives(spec.family, spec.m, phi)
        s2 = np.sum(spec.m**2 * a2)
        s3 = np.sum(spec.m**3 * a3)
        a_phi = spec.p / (2.0 * phi) + s3 / (6.0 * phi**2 * s2)
    return a_beta, a_phi, u


def _starting_values(spec: ModelSpec, control: FitControl):
    if control.beta_start is not None:
        beta = np.asarray(control.beta_start, dtype=float)
        mu0 = fam.link_quantities(spec.link, spec.X @ beta + spec.offset)[0]
    else:
        y, m = spec.y, spec.m
        if spec.family.kind == "binomial":
            mu0 = (m * y + 0.5) / (m + 1.0)
        elif spec.family.kind in ("poisson", "gamma"):
            mu0 = y + 0.1 * (y == 0.0)
        else:
            mu0 = y.astype(float)
        eta0 = fam.link_eval(spec.link, mu0)
        _, d0, _ = fam.link_quantities(spec.link, eta0)
        w0 = spec.m * d0**2 / fam.variance(spec.family, mu0)
        beta = wls_solve(spec.X, w0, eta0 - spec.offset).coefficients
    if spec.dispersion_known:
        phi = 1.0
    elif control.phi_start is not None:
        phi = float(control.phi_start)
    else:
        try:
            phi = max(moment_dispersion(spec, beta), PHI_FLOOR)
        except (InvalidMeanError, FitError):
            phi = 1.0
    return beta, phi


def moment_dispersion(spec: ModelSpec, beta_hat: np.ndarray) -> float:
    """Pearson-statistic dispersion estimate at the given coefficients."""
    if spec.n <= spec.p:
        raise FitError("moment dispersion needs n > p")
    eta = spec.X @ np.asarray(beta_hat, dtype=float) + spec.offset
    mu = fam.link_quantities(spec.link, eta)[0]
    fam._check_mean_domain(spec.family, mu)
    v = fam.variance(spec.family, mu)
    return float(np.sum(spec.m * (spec.y - mu) ** 2 / v) / (spec.n - spec.p))


def _solve_ml_dispersion(spec: ModelSpec, q: np.ndarray) -> float:
    """Root of the dispersion score for fixed coefficients, by bracketing."""
    total_q = float(np.sum(q))
    if total_q <= 0.0:
        return PHI_FLOOR

    def f(phi):
        a1 = fam.a_derivatives(spec.family, spec.m, phi)[0]
        return total_q - float(np.sum(spec.m * a1))

    lo, hi = PHI_FLOOR, 1.0
    while f(hi) > 0.0:
        hi *= 4.0
        if hi > 1e12:
            raise FitError("dispersion score has no finite root")
    if f(lo) < 0.0:
        return lo
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def _phi_update(phi: float, p: int, sum_qr: float, s2: float, s3: float,
                method: str, scale: str) -> float:
    """One multiplicative (or log-scale) quasi-Fisher dispersion update."""
    if method == "mean_br":
        a_phi = (p - 2) / (2.0 * phi) + s3 / (2.0 * phi**2 * s2)
        third, last = s3 / s2**2, (p - 2) / s2
        extra = 0.5  # curvature term of the mean adjustment under log(phi)
    else:  # median_br / mixed_br share the median dispersion update
        a_phi = p / (2.0 * phi) + s3 / (6.0 * phi**2 * s2)
        third, last = s3 / (3.0 * s2**2), p / s2
        extra = 0.0
    if scale == "identity":
        return phi * (1.0 + phi * sum_qr / s2 + phi * third + phi**2 * last)
    # log scale: quasi-Fisher step on zeta = log(phi)
    s_z = sum_qr / (2.0 * phi)
    a_z = phi * a_phi + extra
    i_zz = s2 / (2.0 * phi**2)
    return float(phi * np.exp((s_z + a_z) / i_zz))


def _adjusted_score(spec: ModelSpec, beta, phi, method, state, hat,
                    scale: str = "identity"):
    """Full adjusted score vector for the method (beta part, then phi part).

    With scale == "log" the dispersion component is the adjusted score for
    zeta = log(phi), which is what the log-scale update drives to zero.
    """
    sb = score_beta(spec, beta, phi, state)
    if method in ("ml", "corrected_ml"):
        ab, aph = np.zeros(spec.p), 0.0
    elif method == "mean_br":
        ab, aph, _ = mean_adjustments(spec, beta, phi, hat, state)
    elif method == "median_br":
        ab, aph, _ = median_adjustments(spec, beta, phi, hat, state)
    else:  # mixed_br
        ab, _, _ = mean_adjustments(spec, beta, phi, hat, state)
        _, aph, _ = median_adjustments(spec, beta, phi, hat, state)
    parts = [sb + ab]
    if not spec.dispersion_known:
        sphi = score_phi(spec, beta, phi, state)
        aph = aph if aph is not None else 0.0
        if method == "ml":
            parts.append(np.atleast_1d(sphi))
        elif scale == "log":
            extra = 0.5 if method == "mean_br" else 0.0
            parts.append(np.atleast_1d(phi * (sphi + aph) + extra))
        else:
            parts.append(np.atleast_1d(sphi + aph))
    return np.concatenate(parts)


def _vcov(spec: ModelSpec, state: WorkingState, phi: float) -> np.ndarray:
    inv = wls_solve(spec.X, state.w, np.zeros(spec.n)).xtwx_inverse
    if spec.dispersion_known:
        return inv  # phi = 1
    _, a2, _ = fam.a_derivatives(spec.family, spec.m, phi)
    s2 = float(np.sum(spec.m**2 * a2))
    out = np.zeros((spec.p + 1, spec.p + 1))
    out[:spec.p, :spec.p] = phi * inv
    out[spec.p, spec.p] = 2.0 * phi**4 / s2
    return out


def fit(spec: ModelSpec, method: str, control: FitControl | None = None) -> FitResult:
    """Fit the model by the requested method's adjusted IWLS loop."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose one of {METHODS}")
    if method == "corrected_ml":
        ml = fit(spec, "ml", control)
        if not ml.converged:
            raise FitError("explicit correction requires a converged ML fit")
        beta_c, phi_c = explicit_correction(spec, ml)
        state = working_quantities(spec, beta_c, phi_c)
        return FitResult(method="corrected_ml", beta=beta_c, phi=phi_c,
                         vcov=_vcov(spec, state, phi_c),
                         iterations=ml.iterations + 1, converged=True,
                         adjusted_score_norm=float("nan"),
                         working_state=_state_dict(spec, state, beta_c, phi_c, "corrected_ml"))

    control = control or FitControl()
    beta, phi = _starting_values(spec, control)
    state = working_quantities(spec, beta, phi)
    tol = control.tolerance
    converged = False
    iterations = 0

    prev_norm = np.inf
    for iterations in range(1, control.max_iterations + 1):
        beta_new, phi_new = _one_step(spec, beta, phi, method, control, state)
        # step halving towards the previous iterate on invalid states, and
        # as an ascent safeguard when the adjusted score norm would grow
        # (the plain quasi-Fisher step can cycle around the solution)
        halvings = 0
        at_boundary = False
        while True:
            try:
                state_new = working_quantities(spec, beta_new, phi_new)
                if not np.all(np.isfinite(state_new.w)) or phi_new <= 0.0:
                    raise InvalidMeanError("non-finite working weights")
            except (InvalidMeanError, FloatingPointError,
                    fam.InvalidResponseError):
                halvings += 1
                if halvings > control.max_step_halvings:
                    if (spec.family.kind == "binomial"
                            and float(np.max(np.abs(state.eta))) > ETA_BOUNDARY):
                        # separated data: iterates pressed against the mean
                        # boundary; stop at the last valid iterate
                        beta_new, phi_new, state_new = beta, phi, state
                        at_boundary = True
                        norm = prev_norm
                        break
                    raise FitError("repeated invalid states during fitting")
                beta_new = 0.5 * (beta_new + beta)
                phi_new = 0.5 * (phi_new + phi)
                continue
            hat = wls_solve(spec.X, state_new.w, np.zeros(spec.n)).hat
            score = _adjusted_score(spec, beta_new, phi_new, method,
                                    state_new, hat, control.dispersion_scale)
            if method == "ml":
                score = score[:spec.p]  # dispersion handled after the loop
            norm = float(np.max(np.abs(score))) if score.size else 0.0
            # tolerate mild growth; damp only clear jumps, which indicate
            # the quasi-Fisher step is cycling rather than contracting
            if (np.isfinite(norm) and norm <= 1.02 * prev_norm
                    or halvings >= control.max_step_halvings):
                break
            halvings += 1
            beta_new = 0.5 * (beta_new + beta)
            phi_new = 0.5 * (phi_new + phi)
        if at_boundary:
            beta, phi, state = beta_new, phi_new, state_new
            converged = False
            break
        delta_phi = abs(phi_new - phi)
        beta, phi, state = beta_new, phi_new, state_new
        prev_norm = norm
        if norm <= tol * (1.0 + float(np.max(np.abs(beta)))) and (
                spec.dispersion_known or method == "ml"
                or delta_phi <= tol * (1.0 + phi)):
            converged = True
            break

    if method == "ml" and not spec.dispersion_known and converged:
        phi = _solve_ml_dispersion(spec, state.q)
        state = working_quantities(spec, beta, phi)

    # Separated binomial data drive eta to +-infinity while the score still
    # vanishes, so the loop can stop with a boundary (non-finite) maximum.
    # Extreme linear predictors alone do not prove separation; confirm with
    # the linear-programming detector before withdrawing convergence.
    if (method == "ml" and spec.family.kind == "binomial" and converged
            and float(np.max(np.abs(state.eta))) > ETA_BOUNDARY):
        from .separation import detect_separation
        if detect_separation(spec.X, spec.y, spec.m).separated:
            converged = False

    hat = wls_solve(spec.X, state.w, np.zeros(spec.n)).hat
    score = _adjusted_score(spec, beta, phi, method, state, hat,
                            control.dispersion_scale)
    return FitResult(method=method, beta=beta, phi=phi,
                     vcov=_vcov(spec, state, phi),
                     iterations=iterations, converged=converged,
                     adjusted_score_norm=float(np.max(np.abs(score))),
                     working_state=_state_dict(spec, state, beta, phi, method))


def _one_step(spec: ModelSpec, beta, phi, method, control, state):
    """One IWLS sweep for beta plus the method's dispersion update."""
    sol = wls_solve(spec.X, state.w, np.zeros(spec.n))
    hat = sol.hat
    zadj = state.z - spec.offset
    if method != "ml":
        _, _, xi = mean_adjustments(spec, beta, phi, hat, state)
        zadj = zadj + phi * xi
    beta_new = wls_solve(spec.X, state.w, zadj).coefficients
    if method == "median_br":
        beta_new = beta_new + phi * _median_u(spec, state)

    phi_new = phi
    if not spec.dispersion_known and method != "ml":
        _, a2, a3 = fam.a_derivatives(spec.family, spec.m, phi)
        s2 = float(np.sum(spec.m**2 * a2))
        s3 = float(np.sum(spec.m**3 * a3))
        sum_qr = float(np.sum(state.q - state.rho))
        phi_method = "mean_br" if method == "mean_br" else "median_br"
        phi_new = _phi_update(phi, spec.p, sum_qr, s2, s3, phi_method,
                              control.dispersion_scale)
    return beta_new, phi_new


def _state_dict(spec, state, beta, phi, method):
    out = {"W": state.w, "D": state.d, "z": state.z, "eta": state.eta,
           "mu": state.mu}
    try:
        hat = wls_solve(spec.X, state.w, np.zeros(spec.n)).hat
        out["h"] = hat
        _, _, xi = mean_adjustments(spec, beta, phi, hat, state)
        out["xi"] = xi
        if method in ("median_br", "mixed_br"):
            out["u"] = _median_u(spec, state)
    except (ValueError, FitError):
        pass
    return out


def explicit_correction(spec: ModelSpec, ml_fit: FitResult):
    """One-step bias correction at the ML fit.

    The coefficients take a single IWLS step on z + phi*xi; the dispersion
    is corrected by the closed-form expression that only involves the ML
    estimate (the score term vanishes there).
    """
    if not ml_fit.converged:
        raise FitError("explicit correction requires a converged ML fit")
    beta_hat, phi_hat = ml_fit.beta, ml_fit.phi
    state = working_quantities(spec, beta_hat, phi_hat)
    sol = wls_solve(spec.X, state.w, np.zeros(spec.n))
    _, _, xi = mean_adjustments(spec, beta_hat, phi_hat, sol.hat, state)
    beta_c = wls_solve(spec.X, state.w,
                       state.z - spec.offset + phi_hat * xi).coefficients
    phi_c = phi_hat
    if not spec.dispersion_known:
        _, a2, a3 = fam.a_derivatives(spec.family, spec.m, phi_hat)
        s2 = float(np.sum(spec.m**2 * a2))
        s3 = float(np.sum(spec.m**3 * a3))
        phi_c = phi_hat * (1.0 + phi_hat * s3 / s2**2
                           + phi_hat**2 * (spec.p - 2) / s2)
    return beta_c, phi_c
