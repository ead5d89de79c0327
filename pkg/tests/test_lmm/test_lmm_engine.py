"""
Tests for the linear mixed model engine.
"""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.lmm.lmm_engine import (
    LmmDesign,
    LmmFit,
    extract_features,
    feature_name,
    fit_lmm,
    marginal_loglik,
    predict_random_effects,
    series_stats,
    try_fit,
)
from src.utils.errors import InsufficientData, SingularDesign

INTERCEPT_ONLY = LmmDesign((0,), (0,))
LINEAR = LmmDesign((0, 1), (0, 1))


def simulate_series(rng, n_subjects, times, beta, b_cov, sigma2, design):
    """Per-subject (time, value) series drawn from the model"""
    series = []
    for _ in range(n_subjects):
        t = np.asarray(times, dtype=float)
        b = rng.multivariate_normal(np.zeros(design.q_r), b_cov)
        y = design.fixed_matrix(t) @ beta + design.random_matrix(t) @ b + rng.normal(0, np.sqrt(sigma2), len(t))
        series.append((t, y))
    return series


def direct_loglik(design, series, fit):
    """Marginal log-likelihood summed subject by subject with dense covariances"""
    total = 0.0
    for t, y in series:
        Z = design.random_matrix(t)
        V = Z @ fit.b_cov @ Z.T + fit.sigma2 * np.eye(len(t))
        total += multivariate_normal.logpdf(y, mean=design.fixed_matrix(t) @ fit.beta, cov=V)
    return total


def fitted(beta, b_cov, sigma2):
    return LmmFit(beta=np.asarray(beta, float), b_cov=np.asarray(b_cov, float), sigma2=sigma2,
                  loglik=0.0, converged=True, n_subjects=2, n_obs=2)


class TestLmmDesign:
    """Test polynomial design bases"""

    def test_fixed_and_random_matrices(self):
        design = LmmDesign((0, 1, 2), (0, 1))
        X = design.fixed_matrix(np.array([0.0, 2.0]))
        assert X.tolist() == [[1.0, 0.0, 0.0], [1.0, 2.0, 4.0]]
        assert design.random_matrix(np.array([2.0])).tolist() == [[1.0, 2.0]]
        assert design.p == 3
        assert design.q_r == 2

    def test_feature_names(self):
        assert feature_name("marker1", 0) == "marker1.bi0"
        assert feature_name("marker2", 1) == "marker2.bi1"


class TestFitLmm:
    """Test maximum likelihood fitting by EM"""

    @pytest.fixture
    def intercept_series(self):
        rng = np.random.default_rng(2024)
        return simulate_series(rng, 50, [0, 1, 2, 3], np.array([2.0]), np.array([[1.0]]), 0.25,
                               INTERCEPT_ONLY)

    def test_intercept_recovery(self, intercept_series):
        """Test fixed intercept estimate lies within three standard errors"""
        fit = fit_lmm(INTERCEPT_ONLY, intercept_series)
        standard_error = np.sqrt((fit.b_cov[0, 0] + fit.sigma2 / 4) / 50)
        assert abs(fit.beta[0] - 2.0) < 3 * standard_error
        assert fit.converged is True
        assert fit.n_subjects == 50
        assert fit.n_obs == 200

    def test_loglik_matches_direct_evaluation(self, intercept_series):
        fit = fit_lmm(INTERCEPT_ONLY, intercept_series)
        assert fit.loglik == pytest.approx(direct_loglik(INTERCEPT_ONLY, intercept_series, fit), abs=1e-6)

    def test_loglik_matches_direct_evaluation_random_slope(self):
        rng = np.random.default_rng(11)
        series = simulate_series(rng, 30, [0, 0.5, 1.5, 3], np.array([1.0, 0.5]),
                                 np.array([[1.0, 0.2], [0.2, 0.3]]), 0.4, LINEAR)
        fit = fit_lmm(LINEAR, series)
        assert fit.loglik == pytest.approx(direct_loglik(LINEAR, series, fit), abs=1e-6)

    def test_em_loglik_is_monotone(self):
        rng = np.random.default_rng(5)
        series = simulate_series(rng, 25, [0, 1, 2], np.array([0.0, 1.0]),
                                 np.array([[0.5, 0.0], [0.0, 0.1]]), 1.0, LINEAR)
        fit = fit_lmm(LINEAR, series)
        trace = np.array(fit.loglik_trace)
        assert len(trace) >= 2
        slack = 1e-10 * np.maximum(1.0, np.abs(trace[:-1]))
        assert np.all(np.diff(trace) >= -slack)

    def test_gradient_vanishes_at_estimate(self):
        rng = np.random.default_rng(8)
        series = simulate_series(rng, 40, [0, 1, 2, 3], np.array([1.0, -0.5]),
                                 np.array([[1.0, 0.0], [0.0, 0.2]]), 0.5, LINEAR)
        fit = fit_lmm(LINEAR, series)
        stats = series_stats(LINEAR, series)
        h = 1e-5
        for k in range(LINEAR.p):
            step = np.zeros(LINEAR.p)
            step[k] = h
            up = marginal_loglik(stats, fit.beta + step, fit.b_cov, fit.sigma2)
            down = marginal_loglik(stats, fit.beta - step, fit.b_cov, fit.sigma2)
            assert abs((up - down) / (2 * h)) / fit.n_obs < 1e-4

    def test_covariance_is_positive_semidefinite(self):
        rng = np.random.default_rng(3)
        series = simulate_series(rng, 8, [0, 1], np.array([0.0, 0.0]), np.eye(2) * 0.01, 1.0, LINEAR)
        fit = fit_lmm(LINEAR, series)
        assert np.all(np.linalg.eigvalsh(fit.b_cov) >= -1e-10)
        assert np.allclose(fit.b_cov, fit.b_cov.T)
        assert fit.sigma2 >= 1e-10

    def test_constant_data_degenerates_variances(self):
        series = [(np.array([0.0, 1.0, 2.0]), np.full(3, 5.0)) for _ in range(10)]
        fit = fit_lmm(LINEAR, series)
        assert fit.beta == pytest.approx([5.0, 0.0], abs=1e-6)
        assert fit.sigma2 < 1e-6
        assert np.max(np.abs(fit.b_cov)) < 1e-4
        assert fit.converged is True

    def test_single_subject_is_insufficient(self):
        with pytest.raises(InsufficientData):
            fit_lmm(INTERCEPT_ONLY, [(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))])

    def test_too_few_observations_is_insufficient(self):
        series = [(np.array([0.0, 1.0]), np.array([1.0, 2.0])) for _ in range(2)]
        with pytest.raises(InsufficientData):
            fit_lmm(LINEAR, series)

    def test_subjects_without_data_are_ignored(self):
        rng = np.random.default_rng(1)
        series = simulate_series(rng, 10, [0, 1, 2], np.array([1.0]), np.array([[1.0]]), 0.5, INTERCEPT_ONLY)
        with_empty = series + [(np.zeros(0), np.zeros(0))]
        assert fit_lmm(INTERCEPT_ONLY, with_empty).n_subjects == 10
        assert fit_lmm(INTERCEPT_ONLY, with_empty).loglik == pytest.approx(fit_lmm(INTERCEPT_ONLY, series).loglik)

    def test_rank_deficient_design_is_singular(self):
        design = LmmDesign((0, 1, 2), (0,))
        series = [(np.array([1000.0, 1000.0]), np.array([1.0, 2.0])) for _ in range(5)]
        with pytest.raises(SingularDesign):
            fit_lmm(design, series)
        fit, reason = try_fit(design, series_stats(design, series))
        assert fit is None
        assert reason == "SingularDesign"


class TestRandomEffects:
    """Test BLUP prediction of subject random effects"""

    def test_empty_series_gives_zero_vector(self):
        fit = fitted([1.0, 0.5], np.eye(2), 1.0)
        assert predict_random_effects(fit, LINEAR, np.zeros(0), np.zeros(0)).tolist() == [0.0, 0.0]

    def test_hand_evaluated_blup(self):
        fit = fitted([1.0], [[1.0]], 1.0)
        b = predict_random_effects(fit, INTERCEPT_ONLY, np.array([0.0]), np.array([3.0]))
        assert b[0] == pytest.approx(1.0, abs=1e-12)

    def test_intercept_shrinkage_formula(self):
        """Test b = B * sum(r) / (sigma2 + n B) for the random intercept model"""
        fit = fitted([1.0], [[2.0]], 0.5)
        values = np.array([2.0, 3.5, 1.5, 4.0])
        expected = 2.0 * np.sum(values - 1.0) / (0.5 + 4 * 2.0)
        b = predict_random_effects(fit, INTERCEPT_ONLY, np.arange(4.0), values)
        assert b[0] == pytest.approx(expected, abs=1e-10)

    def test_zero_covariance_gives_zero_effects(self):
        fit = fitted([0.0, 0.0], np.zeros((2, 2)), 1.0)
        b = predict_random_effects(fit, LINEAR, np.array([0.0, 1.0]), np.array([10.0, -4.0]))
        assert np.all(b == 0.0)

    def test_blup_is_affine_in_values(self):
        rng = np.random.default_rng(17)
        fit = fitted([0.3, -0.2], [[1.0, 0.3], [0.3, 0.5]], 0.7)
        times = np.array([0.0, 0.4, 1.3, 2.0])
        for _ in range(10):
            y1, y2 = rng.normal(size=4), rng.normal(size=4)
            a = rng.uniform()
            combined = predict_random_effects(fit, LINEAR, times, a * y1 + (1 - a) * y2)
            separate = (a * predict_random_effects(fit, LINEAR, times, y1)
                        + (1 - a) * predict_random_effects(fit, LINEAR, times, y2))
            assert np.allclose(combined, separate, atol=1e-10)

    def test_extract_features_matches_single_subject_prediction(self):
        fit = fitted([0.3, -0.2], [[1.0, 0.3], [0.3, 0.5]], 0.7)
        series = [(np.array([0.0, 1.0, 2.5]), np.array([0.2, 0.9, 1.1])),
                  (np.zeros(0), np.zeros(0)),
                  (np.array([0.5]), np.array([-1.0]))]
        features = extract_features(fit, LINEAR, series)
        assert features.shape == (3, 2)
        for row, (t, y) in enumerate(series):
            assert np.allclose(features[row], predict_random_effects(fit, LINEAR, t, y), atol=1e-10)
        assert features[1].tolist() == [0.0, 0.0]

    def test_identical_subjects_get_identical_features(self):
        fit = fitted([1.0], [[1.0]], 0.5)
        series = [(np.array([0.0, 1.0]), np.array([2.0, 2.5]))] * 2
        features = extract_features(fit, INTERCEPT_ONLY, series)
        assert features[0].tolist() == features[1].tolist()

    def test_data_rich_subject_is_shrunk_less(self):
        fit = fitted([1.0], [[1.0]], 1.0)
        series = [(np.arange(10.0), np.full(10, 2.0)), (np.array([0.0]), np.array([2.0]))]
        features = extract_features(fit, INTERCEPT_ONLY, series)
        assert abs(features[0, 0]) >= abs(features[1, 0])
