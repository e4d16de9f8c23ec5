import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmbr.linalg import (RankDeficientError, hat_diagonals, htilde_diagonals,
                          wls_solve)


def _random_problem(rng, n, p):
    X = rng.normal(size=(n, p))
    w = rng.uniform(0.2, 3.0, size=n)
    z = rng.normal(size=n)
    return X, w, z


def test_wls_matches_normal_equations():
    rng = np.random.default_rng(0)
    X, w, z = _random_problem(rng, 25, 4)
    sol = wls_solve(X, w, z)
    xtwx = X.T @ (w[:, None] * X)
    ref = np.linalg.solve(xtwx, X.T @ (w * z))
    assert np.allclose(sol.coefficients, ref, atol=1e-12)
    assert np.allclose(sol.xtwx_inverse, np.linalg.inv(xtwx), atol=1e-12)


def test_hat_diagonal_properties():
    rng = np.random.default_rng(1)
    X, w, _ = _random_problem(rng, 30, 5)
    h = hat_diagonals(X, w)
    assert np.all(h > 0.0) and np.all(h < 1.0)
    assert np.sum(h) == pytest.approx(5.0, abs=1e-10)
    # agrees with the explicit projection diag(X (X'WX)^-1 X' W)
    H = X @ np.linalg.inv(X.T @ (w[:, None] * X)) @ X.T @ np.diag(w)
    assert np.allclose(h, np.diag(H), atol=1e-10)


def test_htilde_sums_to_one():
    rng = np.random.default_rng(2)
    X, w, _ = _random_problem(rng, 20, 4)
    for j in range(4):
        ht = htilde_diagonals(X, w, j)
        assert np.sum(ht) == pytest.approx(1.0, abs=1e-10)
        assert np.all(ht >= 0.0)


def test_rank_deficiency_reported():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(10, 3))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])  # exact collinearity
    with pytest.raises(RankDeficientError):
        wls_solve(X, np.ones(10), np.zeros(10))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_wls_residual_orthogonality(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 30))
    p = int(rng.integers(1, min(5, n - 1) + 1))
    X, w, z = _random_problem(rng, n, p)
    sol = wls_solve(X, w, z)
    resid = z - X @ sol.coefficients
    assert np.max(np.abs(X.T @ (w * resid))) < 1e-8
