"""Tests for multinomial logistic regression via the Poisson expansion."""

import numpy as np
import pytest
from scipy.optimize import minimize

from glmbr.engine import FitControl
from glmbr.multinomial import (MultinomialProblem, change_baseline,
                               expand_to_poisson, fit_multinomial,
                               predicted_probs, rescale_means)


def _toy_problem(seed=3, n=25, k=3, baseline=-1):
    rng = np.random.default_rng(seed)
    Xc = np.column_stack([np.ones(n), rng.normal(size=n)])
    gamma = np.array([[0.4, -0.8], [-0.3, 0.6]])  # categories 0 and 1; 2 base
    eta = np.zeros((n, k))
    eta[:, 0] = Xc @ gamma[0]
    eta[:, 1] = Xc @ gamma[1]
    probs = np.exp(eta)
    probs /= probs.sum(axis=1, keepdims=True)
    totals = rng.integers(5, 15, size=n)
    counts = np.vstack([rng.multinomial(totals[i], probs[i])
                        for i in range(n)]).astype(float)
    return MultinomialProblem(counts=counts, covariates=Xc, baseline=baseline)


# --- construction and expansion ---------------------------------------------

def test_problem_validation():
    with pytest.raises(ValueError):
        MultinomialProblem(counts=np.ones((4, 1)), covariates=np.ones((4, 1)))
    with pytest.raises(ValueError):
        MultinomialProblem(counts=np.ones((4, 3)), covariates=np.ones((3, 1)))
    with pytest.raises(ValueError):
        MultinomialProblem(counts=-np.ones((4, 3)), covariates=np.ones((4, 1)))
    with pytest.raises(ValueError):
        MultinomialProblem(counts=np.zeros((4, 3)), covariates=np.ones((4, 1)))
    prob = MultinomialProblem(counts=np.ones((4, 3)),
                              covariates=np.ones((4, 1)), baseline=-1)
    assert prob.baseline == 2 and prob.free_categories == [0, 1]


def test_expansion_shape_and_structure():
    prob = _toy_problem(n=6)
    spec = expand_to_poisson(prob)
    n, k, p = prob.n, prob.k, prob.p
    assert spec.X.shape == (n * k, n + (k - 1) * p)
    assert spec.y.shape == (n * k,)
    # lambda indicators: row i*k+s has a 1 in column i
    for i in range(n):
        for s in range(k):
            assert spec.X[i * k + s, i] == 1.0
    # the baseline category has no gamma columns
    base_rows = spec.X[prob.baseline::k, n:]
    assert np.all(base_rows == 0.0)
    # free category blocks carry the covariates
    assert np.allclose(spec.X[0::k, n:n + p], prob.covariates)
    assert np.allclose(spec.y, prob.counts.reshape(-1))


def test_rescale_means():
    mu = np.array([1.0, 1.0, 2.0, 3.0, 3.0, 4.0])
    totals = np.array([8.0, 5.0])
    out = rescale_means(mu, totals)
    assert out.reshape(2, 3).sum(axis=1) == pytest.approx(totals)
    # proportional within each block
    assert np.allclose(out[:3] / mu[:3], 2.0)
    # idempotent once the sums match
    assert np.allclose(rescale_means(out, totals), out)
    with pytest.raises(ValueError):
        rescale_means(np.array([1.0, -1.0]), np.array([2.0]))
    with pytest.raises(ValueError):
        rescale_means(np.ones(5), np.array([1.0, 1.0]))


# --- fitting ------------------------------------------------------------------

def _multinomial_nll(gvec, prob):
    gamma = np.zeros((prob.k, prob.p))
    for r, s in enumerate(prob.free_categories):
        gamma[s] = gvec[r * prob.p:(r + 1) * prob.p]
    eta = prob.covariates @ gamma.T
    eta -= eta.max(axis=1, keepdims=True)
    logp = eta - np.log(np.exp(eta).sum(axis=1, keepdims=True))
    return -float(np.sum(prob.counts * logp))


def test_ml_matches_direct_multinomial_optimizer():
    prob = _toy_problem()
    res = fit_multinomial(prob, "ml", FitControl(tolerance=1e-12))
    assert res.converged
    direct = minimize(_multinomial_nll, np.zeros((prob.k - 1) * prob.p),
                      args=(prob,), method="BFGS",
                      options={"gtol": 1e-10, "maxiter": 500})
    assert np.allclose(res.gamma.reshape(-1), direct.x, atol=1e-5)
    # fitted means respect the row totals (forced by the lambda scores)
    assert np.allclose(res.fitted_means.sum(axis=1), prob.totals)


@pytest.mark.parametrize("method", ["ml", "mean_br", "median_br"])
def test_fitted_means_add_to_totals(method):
    prob = _toy_problem(seed=9)
    res = fit_multinomial(prob, method, FitControl(tolerance=1e-10))
    assert res.converged
    assert np.allclose(res.fitted_means.sum(axis=1), prob.totals, atol=1e-8)
    assert res.gamma.shape == (prob.k - 1, prob.p)
    assert res.se_gamma.shape == res.gamma.shape
    assert np.all(res.se_gamma > 0)


def test_two_categories_match_binomial_logistic():
    """With k = 2 the model is plain logistic regression on the first
    category's proportion."""
    from glmbr.engine import ModelSpec, fit
    from glmbr.families import Family, Link

    rng = np.random.default_rng(12)
    n = 30
    Xc = np.column_stack([np.ones(n), rng.normal(size=n)])
    m = rng.integers(3, 9, size=n).astype(float)
    probs = 1.0 / (1.0 + np.exp(-(Xc @ np.array([0.2, 0.7]))))
    y1 = rng.binomial(m.astype(int), probs).astype(float)
    counts = np.column_stack([y1, m - y1])
    counts = np.clip(counts, 0.0, None)
    prob = MultinomialProblem(counts=counts, covariates=Xc, baseline=1)

    spec = ModelSpec(X=Xc, y=y1 / m, m=m, family=Family("binomial"),
                     link=Link("logit"))
    for method in ("ml", "mean_br", "median_br"):
        multi = fit_multinomial(prob, method, FitControl(tolerance=1e-12))
        binom = fit(spec, method, FitControl(tolerance=1e-12))
        assert np.allclose(multi.gamma[0], binom.beta, atol=1e-7), method
        assert np.allclose(multi.se_gamma[0], binom.se_beta, atol=1e-6), method


def test_mean_br_shrinks_relative_to_ml():
    prob = _toy_problem(seed=21, n=12)
    ml = fit_multinomial(prob, "ml")
    br = fit_multinomial(prob, "mean_br")
    assert np.max(np.abs(br.gamma)) <= np.max(np.abs(ml.gamma)) + 0.1


# --- baseline changes ---------------------------------------------------------

def test_change_baseline_identity_and_involution():
    prob = _toy_problem()
    res = fit_multinomial(prob, "mean_br")
    assert change_baseline(res, prob.baseline) is res
    moved = change_baseline(res, 0, covariates=prob.covariates)
    back = change_baseline(moved, prob.baseline, covariates=prob.covariates)
    assert np.allclose(back.gamma, res.gamma, atol=1e-10)
    assert np.allclose(back.vcov_gamma, res.vcov_gamma, atol=1e-10)


@pytest.mark.parametrize("method", ["ml", "mean_br"])
def test_change_baseline_matches_refit(method):
    """ML and mean-BR are equivariant under baseline changes: transforming
    the fit equals refitting with the other baseline."""
    prob = _toy_problem(seed=7)
    res = fit_multinomial(prob, method, FitControl(tolerance=1e-12))
    moved = change_baseline(res, 0, covariates=prob.covariates)
    prob0 = MultinomialProblem(counts=prob.counts,
                               covariates=prob.covariates, baseline=0)
    refit = fit_multinomial(prob0, method, FitControl(tolerance=1e-12))
    assert np.allclose(moved.gamma, refit.gamma, atol=1e-6)
    assert np.allclose(moved.se_gamma, refit.se_gamma, atol=1e-6)


def test_median_br_baseline_not_equivariant():
    """Median-BR componentwise medians are not preserved by the baseline
    contrast, so transforming and refitting genuinely differ."""
    prob = _toy_problem(seed=7)
    res = fit_multinomial(prob, "median_br", FitControl(tolerance=1e-12))
    moved = change_baseline(res, 0, covariates=prob.covariates)
    prob0 = MultinomialProblem(counts=prob.counts,
                               covariates=prob.covariates, baseline=0)
    refit = fit_multinomial(prob0, "median_br", FitControl(tolerance=1e-12))
    assert not np.allclose(moved.gamma, refit.gamma, atol=1e-8)


# --- predictions ---------------------------------------------------------------

def test_predicted_probs_sum_to_one_and_order():
    prob = _toy_problem()
    res = fit_multinomial(prob, "mean_br")
    x = prob.covariates[0]
    pr = predicted_probs(res, x)
    assert pr.shape == (prob.k,)
    assert pr.sum() == pytest.approx(1.0)
    assert np.all(pr > 0)
    # invariant under baseline change (probabilities are identified)
    moved = change_baseline(res, 0, covariates=prob.covariates)
    assert np.allclose(predicted_probs(moved, x), pr, atol=1e-8)


# --- separated counts -----------------------------------------------------------

def test_separated_counts_ml_diverges_br_finite():
    """Zero cells aligned with a covariate push ML gamma to infinity: the
    score vanishes only at the boundary, so the estimate keeps growing as
    the tolerance tightens, while mean-BR stays finite and converges."""
    x = np.array([-2.0, -1.0, 1.0, 2.0])
    Xc = np.column_stack([np.ones(4), x])
    counts = np.array([[5.0, 0.0], [4.0, 0.0], [0.0, 6.0], [0.0, 5.0]])
    prob = MultinomialProblem(counts=counts, covariates=Xc, baseline=1)

    ml_loose = fit_multinomial(prob, "ml", FitControl(tolerance=1e-4))
    ml_tight = fit_multinomial(prob, "ml", FitControl(tolerance=1e-12,
                                                      max_iterations=200))
    growing = (np.max(np.abs(ml_tight.gamma)) >
               np.max(np.abs(ml_loose.gamma)) + 1.0)
    assert growing or not ml_tight.converged
    # the reported uncertainty also explodes at the boundary
    assert np.max(ml_tight.se_gamma) > 1e2

    br = fit_multinomial(prob, "mean_br", FitControl(tolerance=1e-10))
    assert br.converged
    assert np.max(np.abs(br.gamma)) < 20.0


def test_rejects_unknown_method():
    prob = _toy_problem(n=5)
    with pytest.raises(ValueError):
        fit_multinomial(prob, "mixed_br")
