from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dagscore.errors import DagscoreError, DomainError, NotSPDError, ProprietyError, RankDeficientError
from dagscore.mnw import (
    DesignMatrix,
    MnwHyper,
    PredictorPool,
    ResponseMatrix,
    compute_stats,
    log_likelihood,
    log_marginal_full,
    log_mnw_density,
    log_multigamma,
    log_norm_const,
    posterior_update,
    schur_complement,
    subset_hyper,
)

from helpers import random_data, random_hyper, random_spd


# -- multivariate gamma --------------------------------------------------------


def test_multigamma_known_values():
    assert log_multigamma(1, 1.0) == 0.0
    assert log_multigamma(2, 1.0) == pytest.approx(math.log(math.pi), abs=1e-14)
    assert log_multigamma(3, 2.0) == pytest.approx(math.log(math.pi**2 / 2), abs=1e-14)


@given(st.integers(1, 6), st.floats(0.1, 50.0))
def test_multigamma_matches_scipy(q, extra):
    from scipy.special import multigammaln

    x = (q - 1) / 2 + extra
    assert log_multigamma(q, x) == pytest.approx(multigammaln(x, q), rel=1e-12, abs=1e-12)


def test_multigamma_domain():
    with pytest.raises(DomainError):
        log_multigamma(3, 1.0)
    with pytest.raises(DomainError):
        log_multigamma(0, 2.0)


# -- data types ----------------------------------------------------------------


def test_response_matrix_validation():
    with pytest.raises(DagscoreError):
        ResponseMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(DagscoreError):
        ResponseMatrix(np.ones((3, 2)), ("a", "a"))
    Y = ResponseMatrix(np.arange(6.0).reshape(3, 2))
    assert (Y.n, Y.q) == (3, 2)
    with pytest.raises(ValueError):
        Y.values[0, 0] = 5.0  # read-only


def test_design_needs_unit_first_column():
    with pytest.raises(DagscoreError, match="unit vector"):
        DesignMatrix(np.array([[1.0, 2.0], [0.5, 1.0]]))
    X = DesignMatrix.intercept_only(4)
    assert X.p == 0 and X.n == 4


def test_rank_deficiency_names_all_dependent_columns():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((10, 2))
    z = np.column_stack([z, z[:, 0] + z[:, 1], 2 * z[:, 0]])
    X = DesignMatrix.from_predictors(z, ["a", "b", "c", "d"])
    Y = ResponseMatrix(rng.standard_normal((10, 2)))
    with pytest.raises(RankDeficientError) as info:
        compute_stats(Y, X)
    assert info.value.columns == ["c", "d"]


def test_predictor_pool_design():
    pool = PredictorPool(np.arange(12.0).reshape(4, 3))
    X = pool.design([2, 0])
    assert X.labels == ("z1", "z3")
    assert np.array_equal(X.values[:, 1], [0.0, 3.0, 6.0, 9.0])


def test_hyper_validation():
    with pytest.raises(ProprietyError):
        MnwHyper(np.zeros((1, 2)), np.eye(1), 0.9, np.eye(2))
    with pytest.raises(NotSPDError):
        MnwHyper(np.zeros((1, 2)), np.eye(1), 3.0, np.array([[1.0, 2.0], [2.0, 1.0]]))


# -- sufficient statistics ------------------------------------------------------


def test_stats_sample_mean_case():
    s = compute_stats(ResponseMatrix(np.array([[1.0], [2.0], [3.0]])), DesignMatrix.intercept_only(3))
    assert s.bhat[0, 0] == pytest.approx(2.0)
    assert s.ete[0, 0] == pytest.approx(2.0)


def test_stats_exact_fit_has_zero_residuals():
    rng = np.random.default_rng(2)
    X = DesignMatrix.from_predictors(rng.standard_normal((7, 2)))
    B = rng.standard_normal((3, 2))
    s = compute_stats(ResponseMatrix(X.values @ B), X)
    assert np.allclose(s.ete, 0.0, atol=1e-12)
    assert np.allclose(s.bhat, B)


def test_stats_match_normal_equations():
    rng = np.random.default_rng(3)
    Y, X = random_data(rng, 5, 2, 0)
    x, y = X.values, Y.values
    bhat = np.linalg.inv(x.T @ x) @ x.T @ y
    e = y - x @ bhat
    s = compute_stats(Y, X)
    assert np.allclose(s.ete, e.T @ e, atol=1e-12)
    assert np.allclose(s.xtx @ s.bhat, s.xty, atol=1e-10)


def test_ete_positive_definite_when_n_exceeds_p_plus_q():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p, q = rng.integers(0, 3), rng.integers(1, 4)
        Y, X = random_data(rng, p + q + 1, q, p)
        np.linalg.cholesky(compute_stats(Y, X).ete)


# -- normalizing constant and update --------------------------------------------


def test_norm_const_scalar_by_hand():
    h = MnwHyper(np.zeros((1, 1)), np.eye(1), 3.0, 2.0 * np.eye(1))
    expected = 0.5 * math.log(2 * math.pi) + math.log(math.sqrt(math.pi) / 2)
    assert log_norm_const(h) == pytest.approx(expected, abs=1e-14)


def test_norm_const_identity_scales():
    h = MnwHyper(np.zeros((2, 3)), np.eye(2), 3.0, np.eye(3))
    expected = 3 * 2 / 2 * math.log(2 * math.pi) + 4.5 * math.log(2) + log_multigamma(3, 1.5)
    assert log_norm_const(h) == pytest.approx(expected, abs=1e-12)


def test_norm_const_cofactor_determinants():
    rng = np.random.default_rng(5)
    C, R = random_spd(rng, 2), random_spd(rng, 2)
    det = lambda m: m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    a = 4.0
    expected = (
        2 * 2 / 2 * math.log(2 * math.pi)
        + a * 2 / 2 * math.log(2)
        + math.log(math.pi) / 2 + math.lgamma(a / 2) + math.lgamma(a / 2 - 0.5)
        - 2 / 2 * math.log(det(C))
        - a / 2 * math.log(det(R))
    )
    assert log_norm_const(MnwHyper(np.zeros((2, 2)), C, a, R)) == pytest.approx(expected, abs=1e-12)


def test_norm_const_permutation_invariant():
    rng = np.random.default_rng(6)
    h = random_hyper(rng, 2, 4)
    perm = rng.permutation(4)
    h2 = MnwHyper(h.b_mean[:, perm], h.c_prec, h.dof, h.r_scale[np.ix_(perm, perm)])
    assert log_norm_const(h2) == pytest.approx(log_norm_const(h), abs=1e-12)


def test_update_least_squares_prior_mean_has_no_discrepancy():
    rng = np.random.default_rng(7)
    Y, X = random_data(rng, 10, 2, 1)
    s = compute_stats(Y, X)
    h = MnwHyper(s.bhat, random_spd(rng, 2), 2.0, random_spd(rng, 2))
    post = posterior_update(h, s)
    assert np.allclose(post.r_scale, h.r_scale + s.ete, atol=1e-10)
    assert post.dof == 2.0 + 10
    assert np.allclose(post.b_mean, s.bhat, atol=1e-10)


def test_update_scalar_normal_gamma():
    y = np.array([0.3, -1.2, 2.5, 0.8, 1.1])
    c, b0, a, r = 0.7, 0.4, 3.0, 1.5
    h = MnwHyper(np.array([[b0]]), np.array([[c]]), a, np.array([[r]]))
    post = posterior_update(h, compute_stats(ResponseMatrix(y[:, None]), DesignMatrix.intercept_only(5)))
    n, ybar = len(y), y.mean()
    assert post.c_prec[0, 0] == pytest.approx(c + n)
    assert post.b_mean[0, 0] == pytest.approx((y.sum() + c * b0) / (c + n))
    assert post.dof == a + n
    ss = np.sum((y - ybar) ** 2) + c * n / (c + n) * (ybar - b0) ** 2
    assert post.r_scale[0, 0] == pytest.approx(r + ss, rel=1e-12)


def _scipy_log_joint(h, B, omega):
    sigma = np.linalg.inv(omega)
    lw = stats.wishart(df=h.dof, scale=np.linalg.inv(h.r_scale)).logpdf(omega)
    lb = stats.matrix_normal(mean=h.b_mean, rowcov=np.linalg.inv(h.c_prec), colcov=sigma).logpdf(B)
    return lw + lb


def test_density_matches_scipy():
    rng = np.random.default_rng(8)
    h = random_hyper(rng, 2, 3)
    B = rng.standard_normal((2, 3))
    omega = random_spd(rng, 3)
    assert log_mnw_density(h, B, omega) == pytest.approx(_scipy_log_joint(h, B, omega), abs=1e-9)


def test_likelihood_matches_scipy():
    rng = np.random.default_rng(9)
    Y, X = random_data(rng, 6, 2, 1)
    B, omega = rng.standard_normal((2, 2)), random_spd(rng, 2)
    mvn = stats.multivariate_normal
    expected = sum(
        mvn(mean=X.values[i] @ B, cov=np.linalg.inv(omega)).logpdf(Y.values[i]) for i in range(6)
    )
    assert log_likelihood(Y, X, B, omega) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_conjugacy_identity_against_scipy_densities(seed):
    rng = np.random.default_rng(100 + seed)
    q, p = 1 + seed % 3, seed % 2
    Y, X = random_data(rng, 8, q, p)
    h = random_hyper(rng, p + 1, q)
    s = compute_stats(Y, X)
    post = posterior_update(h, s)
    lm = log_marginal_full(h, s)
    mvn = stats.multivariate_normal
    for _ in range(3):
        B, omega = rng.standard_normal((p + 1, q)), random_spd(rng, q)
        lik = sum(
            mvn(mean=X.values[i] @ B, cov=np.linalg.inv(omega)).logpdf(Y.values[i])
            for i in range(Y.n)
        )
        ratio = lik + _scipy_log_joint(h, B, omega) - _scipy_log_joint(post, B, omega)
        assert lm == pytest.approx(ratio, abs=1e-8)


def test_marginal_row_permutation_invariant():
    rng = np.random.default_rng(10)
    Y, X = random_data(rng, 9, 2, 2)
    h = random_hyper(rng, 3, 2)
    perm = rng.permutation(9)
    a = log_marginal_full(h, compute_stats(Y, X))
    b = log_marginal_full(h, compute_stats(Y.take_rows(perm), X.take_rows(perm)))
    assert a == pytest.approx(b, abs=1e-10)


# -- subset prior and Schur complements -----------------------------------------


def test_subset_hyper_full_set_is_identity():
    rng = np.random.default_rng(11)
    h = random_hyper(rng, 2, 3)
    assert subset_hyper(h, [0, 1, 2]) is h


def test_subset_hyper_substitution():
    rng = np.random.default_rng(12)
    h = MnwHyper(rng.standard_normal((2, 3)), np.eye(2), 5.0, random_spd(rng, 3))
    s = subset_hyper(h, [1])
    assert s.dof == 3.0
    assert s.r_scale[0, 0] == h.r_scale[1, 1]
    assert np.array_equal(s.b_mean[:, 0], h.b_mean[:, 1])
    assert np.array_equal(s.c_prec, h.c_prec)


@given(st.integers(1, 6), st.floats(0.01, 5.0), st.data())
def test_subset_of_proper_hyper_is_proper(q, extra, data):
    # a > q - 1 implies a - |Jbar| > |J| - 1 for every nonempty J
    h = MnwHyper(np.zeros((1, q)), np.eye(1), q - 1 + extra, np.eye(q))
    J = data.draw(st.sets(st.integers(0, q - 1), min_size=1))
    assert subset_hyper(h, J).dof > len(J) - 1


@settings(max_examples=25)
@given(st.integers(0, 2**31), st.sets(st.integers(0, 3), min_size=1, max_size=3))
def test_schur_inverse_duality(seed, J):
    rng = np.random.default_rng(seed)
    omega = random_spd(rng, 4)
    J = sorted(J)
    lhs = np.linalg.inv(omega)[np.ix_(J, J)]
    rhs = np.linalg.inv(schur_complement(omega, J))
    assert np.allclose(lhs, rhs, atol=1e-10, rtol=1e-10)
