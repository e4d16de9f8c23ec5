"""Baseline-category multinomial logistic regression via a Poisson model.

The multinomial likelihood for counts y_i1..y_ik with totals m_i factors
through a Poisson log-linear model with per-observation intercepts:
log mu_is = lambda_i + x_i' gamma_s, gamma_baseline = 0.  Maximum likelihood
on the expansion equals multinomial maximum likelihood because the lambda
score equations force the fitted means to add to the totals.  The
bias-reducing methods do not inherit that equivalence automatically; each
of their IWLS sweeps therefore first rescales the current Poisson means so
every row adds to its total, and only then applies the adjusted update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import FitControl, FitError, ModelSpec
from .families import Family, Link
from .linalg import wls_solve

__all__ = ["MultinomialProblem", "MultinomialFit", "expand_to_poisson",
           "rescale_means", "fit_multinomial", "change_baseline",
           "predicted_probs"]


@dataclass
class MultinomialProblem:
    """Counts (n x k, row totals m_i), covariates (n x p) and a baseline.

    The baseline is a 0-based category index; the default -1 means the last
    category.
    """

    counts: np.ndarray
    covariates: np.ndarray
    baseline: int = -1

    def __post_init__(self):
        self.counts = np.atleast_2d(np.asarray(self.counts, dtype=float))
        self.covariates = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        n, k = self.counts.shape
        if k < 2:
            raise ValueError("need at least two categories")
        if self.covariates.shape[0] != n:
            raise ValueError("covariates must have one row per count row")
        if np.any(self.counts < 0.0):
            raise ValueError("counts must be nonnegative")
        if np.any(self.counts.sum(axis=1) < 1.0):
            raise ValueError("every row needs a positive total")
        self.baseline = int(self.baseline) % k

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def k(self) -> int:
        return self.counts.shape[1]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def free_categories(self) -> list[int]:
        """Non-baseline category indices, in increasing order; this fixes
        the row-block order of gamma and the column order of the expansion."""
        return [s for s in range(self.k) if s != self.baseline]


@dataclass
class MultinomialFit:
    gamma: np.ndarray          # (k-1) x p, rows ordered by free_categories
    lambdas: np.ndarray        # n nuisance intercepts
    vcov_gamma: np.ndarray     # ((k-1)p) x ((k-1)p)
    method: str
    converged: bool
    baseline: int
    free_categories: list[int]
    iterations: int = 0
    fitted_means: np.ndarray | None = field(default=None, repr=False)  # n x k

    @property
    def se_gamma(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov_gamma)).reshape(self.gamma.shape)


def expand_to_poisson(problem: MultinomialProblem) -> ModelSpec:
    """Poisson/log ModelSpec with nk rows, ordered observation-major.

    Columns: n lambda indicators first, then one p-column block per free
    category in increasing category order.
    """
    n, k, p = problem.n, problem.k, problem.p
    rows = n * k
    X = np.zeros((rows, n + (k - 1) * p))
    for i in range(n):
        X[i * k:(i + 1) * k, i] = 1.0
    for block, s in enumerate(problem.free_categories):
        cols = slice(n + block * p, n + (block + 1) * p)
        X[s::k, cols] = problem.covariates
    y = problem.counts.reshape(-1)
    return ModelSpec(X=X, y=y, family=Family("poisson"), link=Link("log"))


def rescale_means(mu: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Scale each length-k block of mu so it adds exactly to its total."""
    mu = np.asarray(mu, dtype=float)
    totals = np.asarray(totals, dtype=float)
    n = totals.shape[0]
    if mu.size % n != 0:
        raise ValueError("mean vector length must be a multiple of n")
    blocks = mu.reshape(n, -1)
    sums = blocks.sum(axis=1)
    if np.any(sums <= 0.0) or np.any(mu <= 0.0):
        raise ValueError("means must be positive with positive row sums")
    return (blocks * (totals / sums)[:, None]).reshape(-1)


def _split_params(problem: MultinomialProblem, params: np.ndarray):
    n, p = problem.n, problem.p
    return params[:n], params[n:].reshape(problem.k - 1, p)


def fit_multinomial(problem: MultinomialProblem, method: str,
                    control: FitControl | None = None) -> MultinomialFit:
    """Fit by ml, mean_br or median_br on the Poisson expansion."""
    if method not in ("ml", "mean_br", "median_br"):
        raise ValueError("method must be ml, mean_br or median_br")
    control = control or FitControl()
    spec = expand_to_poisson(problem)
    totals = problem.totals

    if method == "ml":
        res = engine.fit(spec, "ml", control)
        params, iterations, converged = res.beta, res.iterations, res.converged
        state = engine.working_quantities(spec, params, 1.0)
        vcov = wls_solve(spec.X, state.w, np.zeros(spec.n)).xtwx_inverse
        mu = state.mu
    else:
        params, iterations, converged, mu, vcov = _fit_rescaled(
            problem, spec, method, control)

    lambdas, gamma = _split_params(problem, params)
    gidx = np.arange(problem.n, spec.p)
    return MultinomialFit(gamma=gamma, lambdas=lambdas,
                          vcov_gamma=vcov[np.ix_(gidx, gidx)],
                          method=method, converged=converged,
                          baseline=problem.baseline,
                          free_categories=problem.free_categories,
                          iterations=iterations,
                          fitted_means=mu.reshape(problem.n, problem.k))


def _fit_rescaled(problem, spec, method, control):
    """Adjusted IWLS with means rescaled to the row totals before each sweep.

    Rescaling makes the lambda intercepts unidentified (any lambda shift is
    undone by the rescaling), so each sweep folds the rescaling factor back
    into lambda; this pins lambda at the values whose plain Poisson means
    already add to the totals.
    """
    n, k = problem.n, problem.k
    totals = problem.totals

    def normalize(par):
        sums = np.exp(spec.X @ par).reshape(n, k).sum(axis=1)
        par = par.copy()
        par[:n] += np.log(totals / sums)
        return par

    if control.beta_start is not None:
        params = np.asarray(control.beta_start, dtype=float)
    else:
        mu0 = rescale_means((problem.counts + 0.5).reshape(-1), totals)
        eta0 = np.log(mu0)
        params = wls_solve(spec.X, mu0, eta0).coefficients
    params = normalize(params)
    tol = control.tolerance
    converged = False
    iterations = 0
    for iterations in range(1, control.max_iterations + 1):
        eta = spec.X @ params
        mu_bar = rescale_means(np.exp(eta), totals)
        state = engine.working_quantities(spec, params, 1.0,
                                          mu_override=mu_bar)
        sol = wls_solve(spec.X, state.w, np.zeros(spec.n))
        _, _, xi = engine.mean_adjustments(spec, params, 1.0, sol.hat, state)
        new = wls_solve(spec.X, state.w, state.z + xi).coefficients
        if method == "median_br":
            new = new + engine._median_u(spec, state)
        new = normalize(new)
        step = float(np.max(np.abs(new - params)))
        params = new
        if step <= tol * (1.0 + float(np.max(np.abs(params)))):
            converged = True
            break
    eta = spec.X @ params
    mu_bar = rescale_means(np.exp(eta), totals)
    state = engine.working_quantities(spec, params, 1.0, mu_override=mu_bar)
    vcov = wls_solve(spec.X, state.w, np.zeros(spec.n)).xtwx_inverse
    return params, iterations, converged, mu_bar, vcov


def change_baseline(fit: MultinomialFit, new_baseline: int,
                    covariates: np.ndarray | None = None) -> MultinomialFit:
    """Re-express the fit against another baseline category.

    The new coefficients are gamma'_s = gamma_s - gamma_new (with the old
    baseline picking up -gamma_new), a linear map of the old gamma; the
    covariance transforms by the same map.  Mean-BR estimates transformed
    this way agree with a direct refit; median-BR estimates generally do
    not, because componentwise medians are not preserved by contrasts of
    several coefficients.
    """
    k = len(fit.free_categories) + 1
    p = fit.gamma.shape[1]
    new_baseline = int(new_baseline) % k
    if new_baseline == fit.baseline:
        return fit

    old_free = fit.free_categories
    new_free = [s for s in range(k) if s != new_baseline]
    b_pos = old_free.index(new_baseline)

    # rows of L: new gamma block per category in new_free; columns: old blocks
    L = np.zeros(((k - 1) * p, (k - 1) * p))
    for r, s in enumerate(new_free):
        rows = slice(r * p, (r + 1) * p)
        L[rows, b_pos * p:(b_pos + 1) * p] -= np.eye(p)
        if s != fit.baseline:
            c = old_free.index(s)
            L[rows, c * p:(c + 1) * p] += np.eye(p)
    gvec = fit.gamma.reshape(-1)
    new_gamma = (L @ gvec).reshape(k - 1, p)
    new_vcov = L @ fit.vcov_gamma @ L.T

    lambdas = fit.lambdas
    if covariates is not None:
        lambdas = lambdas + np.atleast_2d(covariates) @ fit.gamma[b_pos]
    return MultinomialFit(gamma=new_gamma, lambdas=lambdas,
                          vcov_gamma=new_vcov, method=fit.method,
                          converged=fit.converged, baseline=new_baseline,
                          free_categories=new_free,
                          iterations=fit.iterations,
                          fitted_means=fit.fitted_means)


def predicted_probs(fit: MultinomialFit, x: np.ndarray) -> np.ndarray:
    """Category probabilities at covariate vector x (softmax, baseline 0)."""
    x = np.asarray(x, dtype=float)
    k = len(fit.free_categories) + 1
    eta = np.zeros(k)
    for r, s in enumerate(fit.free_categories):
        eta[s] = float(x @ fit.gamma[r])
    eta -= eta.max()
    w = np.exp(eta)
    return w / w.sum()
