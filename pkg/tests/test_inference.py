"""Tests for Wald intervals, the adjusted score statistic and the
normal-model confidence interval calculus."""

import numpy as np
import pytest
from scipy import stats

from glmbr.engine import FitControl, ModelSpec, fit
from glmbr.families import Family, Link
from glmbr.datasets import clotting_spec
from glmbr.inference import (IntervalSet, adjusted_score_statistic,
                             ci_inclusion_check, expected_information,
                             normal_intervals, quantile, transform_exp,
                             wald_interval)


def _poisson_spec(seed=11, n=40):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    mu = np.exp(X @ np.array([0.3, 0.5, -0.4]))
    y = rng.poisson(mu).astype(float)
    return ModelSpec(X=X, y=y, family=Family("poisson"), link=Link("log"))


# --- quantiles -------------------------------------------------------------

def test_quantile_values():
    assert quantile("normal", 0.975) == pytest.approx(1.959964, abs=1e-6)
    assert quantile("student_t", 0.975, df=10) == pytest.approx(
        stats.t.ppf(0.975, 10))
    assert quantile("chi_square", 0.95, df=1) == pytest.approx(
        stats.chi2.ppf(0.95, 1))
    with pytest.raises(ValueError):
        quantile("normal", 1.5)
    with pytest.raises(ValueError):
        quantile("student_t", 0.9)
    with pytest.raises(ValueError):
        quantile("weibull", 0.9, df=3)


# --- Wald intervals and transforms -----------------------------------------

def test_wald_interval_matches_hand_formula():
    spec = _poisson_spec()
    res = fit(spec, "mean_br")
    ci = wald_interval(res, 1, 0.95)
    z = stats.norm.ppf(0.975)
    assert ci.lower == pytest.approx(res.beta[1] - z * res.se_beta[1])
    assert ci.upper == pytest.approx(res.beta[1] + z * res.se_beta[1])
    assert ci.contains(res.beta[1])
    with pytest.raises(ValueError):
        wald_interval(res, 1, 1.2)


def test_transform_exp_delta_method():
    spec = _poisson_spec()
    res = fit(spec, "median_br")
    psi, se = transform_exp(res, 2)
    assert psi == pytest.approx(np.exp(res.beta[2]))
    assert se == pytest.approx(psi * res.se_beta[2])


def test_expected_information_blocks():
    spec = clotting_spec()
    res = fit(spec, "mean_br")
    info = expected_information(spec, res.beta, res.phi)
    inv = info.inverse()
    p = spec.p
    assert inv.shape == (p + 1, p + 1)
    assert np.allclose(inv, res.vcov, rtol=1e-8)
    assert inv[p, p] > 0
    assert np.allclose(inv[:p, p], 0.0)  # orthogonal parameterization


# --- adjusted score statistic ----------------------------------------------

@pytest.mark.parametrize("method", ["mean_br", "median_br"])
def test_statistic_zero_at_unconstrained_estimate(method):
    spec = _poisson_spec()
    res = fit(spec, method, FitControl(tolerance=1e-12))
    stat, dof, pval = adjusted_score_statistic(
        spec, [1], [res.beta[1]], method, FitControl(tolerance=1e-12))
    assert dof == 1
    assert abs(stat) < 1e-10
    assert pval == pytest.approx(1.0)


@pytest.mark.parametrize("method", ["mean_br", "median_br"])
def test_statistic_grows_away_from_estimate(method):
    spec = _poisson_spec()
    res = fit(spec, method)
    offsets = [0.0, 0.5, 1.0]
    stats_seq = [adjusted_score_statistic(spec, [1], [res.beta[1] + d],
                                          method)[0] for d in offsets]
    assert stats_seq[0] < stats_seq[1] < stats_seq[2]
    assert all(s >= 0.0 for s in stats_seq)


def test_statistic_invariant_to_column_rescaling():
    spec = _poisson_spec()
    stat1, _, p1 = adjusted_score_statistic(spec, [1], [0.3], "mean_br",
                                            FitControl(tolerance=1e-12))
    # rescale the tested column; the same hypothesis is beta1' = 0.3 / 10
    X2 = spec.X.copy()
    X2[:, 1] *= 10.0
    spec2 = ModelSpec(X=X2, y=spec.y, family=spec.family, link=spec.link)
    stat2, _, p2 = adjusted_score_statistic(spec2, [1], [0.03], "mean_br",
                                            FitControl(tolerance=1e-12))
    assert stat1 == pytest.approx(stat2, rel=1e-6, abs=1e-8)
    assert p1 == pytest.approx(p2, rel=1e-6, abs=1e-8)


def test_statistic_with_estimated_dispersion():
    spec = clotting_spec()
    res = fit(spec, "mean_br", FitControl(tolerance=1e-12))
    stat, dof, _ = adjusted_score_statistic(
        spec, [3], [res.beta[3]], "mean_br", FitControl(tolerance=1e-12))
    assert dof == 1
    assert abs(stat) < 1e-8
    # a clearly false hypothesis should be strongly rejected
    stat0, _, p0 = adjusted_score_statistic(spec, [2], [0.0], "mean_br")
    assert stat0 > 10.0
    assert p0 < 0.01


def test_statistic_multidimensional_block():
    spec = _poisson_spec()
    res = fit(spec, "mean_br", FitControl(tolerance=1e-12))
    stat, dof, pval = adjusted_score_statistic(
        spec, [1, 2], res.beta[[1, 2]], "mean_br", FitControl(tolerance=1e-12))
    assert dof == 2
    assert abs(stat) < 1e-10
    assert pval == pytest.approx(1.0)


def test_statistic_rejects_bad_inputs():
    spec = _poisson_spec()
    with pytest.raises(ValueError):
        adjusted_score_statistic(spec, [], [], "mean_br")
    with pytest.raises(ValueError):
        adjusted_score_statistic(spec, [0, 1, 2], [0, 0, 0], "mean_br")
    with pytest.raises(ValueError):
        adjusted_score_statistic(spec, [1], [0.0], "ml")


# --- normal-model intervals -------------------------------------------------

def test_normal_interval_divisors():
    rss, n, p, kappa, level = 12.0, 20, 3, 0.4, 0.95
    out = normal_intervals(rss, n, p, kappa, level, center=1.0)
    z = stats.norm.ppf(0.975)
    t = stats.t.ppf(0.975, n - p)
    assert out["hat"].length == pytest.approx(2 * z * np.sqrt(kappa * rss / n))
    assert out["star"].length == pytest.approx(
        2 * z * np.sqrt(kappa * rss / (n - p)))
    assert out["dagger"].length == pytest.approx(
        2 * z * np.sqrt(kappa * rss / (n - p - 2.0 / 3.0)))
    assert out["exact"].length == pytest.approx(
        2 * t * np.sqrt(kappa * rss / (n - p)))
    for iv in out.values():
        assert iv.contains(1.0)
    # nesting that holds for every nu and alpha
    assert out["hat"].included_in(out["star"])
    assert out["star"].included_in(out["dagger"])
    with pytest.raises(ValueError):
        normal_intervals(rss, 3, 3, kappa, level)
    with pytest.raises(ValueError):
        normal_intervals(-1.0, n, p, kappa, level)


def test_interval_set_predicates():
    a = IntervalSet("star", -1.0, 1.0, 0.95)
    b = IntervalSet("dagger", -2.0, 2.0, 0.95)
    assert a.included_in(b) and not b.included_in(a)
    assert a.length == pytest.approx(2.0)
    assert a.contains(0.0) and not a.contains(1.5)


def test_inclusion_check_threshold_nu1():
    """For one residual degree of freedom the dagger interval sits inside the
    exact interval exactly when alpha < 0.35562, and its length is closer to
    the exact length exactly when alpha < 0.62647."""
    assert ci_inclusion_check(1, 0.3550).g > 0
    assert ci_inclusion_check(1, 0.3560).g < 0
    assert ci_inclusion_check(1, 0.6260).h > 0
    assert ci_inclusion_check(1, 0.6270).h < 0


def test_inclusion_check_common_levels():
    for nu in (1, 2, 5, 10, 30, 100):
        for alpha in (0.01, 0.05, 0.1):
            chk = ci_inclusion_check(nu, alpha)
            assert chk.hat_in_star and chk.star_in_dagger
            assert chk.star_in_exact  # z <= t always
            assert chk.dagger_in_exact  # alpha below the nu=1 threshold
            assert chk.dagger_len_closer
    with pytest.raises(ValueError):
        ci_inclusion_check(0, 0.05)
    with pytest.raises(ValueError):
        ci_inclusion_check(5, 0.0)


def test_inclusion_check_agrees_with_actual_intervals():
    rss, kappa = 7.3, 0.9
    for nu, alpha in [(1, 0.05), (1, 0.5), (4, 0.05), (4, 0.9)]:
        n, p = nu + 2, 2
        out = normal_intervals(rss, n, p, kappa, 1.0 - alpha)
        chk = ci_inclusion_check(nu, alpha)
        assert out["dagger"].included_in(out["exact"]) == (chk.g > 0)
        closer = (abs(out["dagger"].length - out["exact"].length)
                  <= abs(out["star"].length - out["exact"].length))
        assert closer == (chk.h > 0)
