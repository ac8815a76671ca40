"""Tests for error metrics, divergence series, the exponential decay fit,
and the RMSE correlation summary."""

import numpy as np
import pytest

from filterstab.exceptions import (
    InsufficientSampleError,
    UndefinedCorrelationError,
)
from filterstab.measures import EmpiricalMeasure, GaussianSpec, sample_gaussian
from filterstab.metrics import (
    divergence_series,
    ensemble_spread,
    error_series,
    exp_fit,
    exp_jacobian,
    exp_model,
    pearson,
    rmse_vs_divergence,
    scaled_l2_error,
)
from filterstab.sinkhorn import SinkhornConfig


class TestScaledError:
    def test_zero_for_centered_ensemble(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        m = EmpiricalMeasure.uniform(np.stack([x + 0.5, x - 0.5]))
        assert scaled_l2_error(m, x) == pytest.approx(0.0, abs=1e-14)

    def test_uniform_offset(self):
        # mean off by delta in every coordinate: error = delta
        x = np.zeros(10)
        m = EmpiricalMeasure.uniform(np.full((3, 10), 0.7))
        assert scaled_l2_error(m, x) == pytest.approx(0.7)

    def test_matches_definition(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(20, 6))
        x = rng.normal(size=6)
        m = EmpiricalMeasure.uniform(pts)
        expected = np.linalg.norm(pts.mean(axis=0) - x) / np.sqrt(6)
        assert scaled_l2_error(m, x) == pytest.approx(expected, rel=1e-12)


class TestSpread:
    def test_identical_atoms(self):
        m = EmpiricalMeasure.uniform(np.tile(np.arange(4.0), (5, 1)))
        assert ensemble_spread(m) == pytest.approx(0.0, abs=1e-12)

    def test_isotropic_gaussian(self):
        m = sample_gaussian(GaussianSpec(np.zeros(5), 0.64), 20_000, seed=1)
        assert ensemble_spread(m) == pytest.approx(0.8, rel=0.03)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(30, 4))
        a = ensemble_spread(EmpiricalMeasure.uniform(pts))
        b = ensemble_spread(EmpiricalMeasure.uniform(pts[::-1]))
        assert a == pytest.approx(b, rel=1e-12)

    def test_needs_two_atoms(self):
        with pytest.raises(InsufficientSampleError):
            ensemble_spread(EmpiricalMeasure.uniform(np.zeros((1, 3))))


class TestDivergenceSeries:
    def test_identical_runs_give_zero(self):
        rng = np.random.default_rng(3)
        run = [EmpiricalMeasure.uniform(rng.normal(size=(15, 4))) for _ in range(4)]
        times = np.arange(4) * 0.05
        div = divergence_series(times, [run], [run], SinkhornConfig(epsilon=0.01))
        assert div.per_realization.shape == (1, 4)
        assert np.abs(div.mean).max() <= 1e-4

    def test_gaussian_offset_oracle(self):
        # W2 between N(0, s1 I) and N(delta, s2 I) has the closed form
        # sqrt(||delta||^2 + d (sqrt(s1) - sqrt(s2))^2); empirical clouds
        # should land near it
        d = 10
        a = sample_gaussian(GaussianSpec(np.zeros(d), 0.1), 500, seed=4)
        b = sample_gaussian(GaussianSpec(np.full(d, 4.0), 1.0), 500, seed=5)
        w2 = np.sqrt(16.0 * d + d * (np.sqrt(0.1) - 1.0) ** 2)
        div = divergence_series(
            [0.0], [[a]], [[b]], SinkhornConfig(epsilon=1.0, rel_tol=1e-6)
        )
        assert div.mean[0] == pytest.approx(w2, rel=0.1)

    def test_mean_over_realizations(self):
        rng = np.random.default_rng(6)
        runs_a = [[EmpiricalMeasure.uniform(rng.normal(size=(10, 3)))]
                  for _ in range(3)]
        runs_b = [[EmpiricalMeasure.uniform(rng.normal(size=(10, 3)) + 2.0)]
                  for _ in range(3)]
        div = divergence_series([0.0], runs_a, runs_b, SinkhornConfig(epsilon=0.1))
        assert div.mean[0] == pytest.approx(div.per_realization[:, 0].mean())

    def test_realization_count_mismatch(self):
        m = [EmpiricalMeasure.uniform(np.zeros((2, 2)))]
        with pytest.raises(ValueError):
            divergence_series([0.0], [m], [m, m], SinkhornConfig(epsilon=0.1))


class TestErrorSeries:
    def test_shapes_and_values(self):
        rng = np.random.default_rng(7)
        truth = rng.normal(size=(3, 4))
        runs = [
            [EmpiricalMeasure.uniform(rng.normal(size=(8, 4))) for _ in range(3)]
            for _ in range(2)
        ]
        es = error_series(np.arange(3) * 0.05, runs, truth)
        assert es.e2.shape == (2, 3)
        for r in range(2):
            for k in range(3):
                assert es.e2[r, k] == pytest.approx(
                    scaled_l2_error(runs[r][k], truth[k]) ** 2
                )
        np.testing.assert_allclose(es.rmse, np.sqrt(es.e2_mean))


class TestExpFit:
    def test_noiseless_recovery(self):
        t = np.linspace(0.0, 10.0, 201)
        v = exp_model(t, 9.5, 3.7, 0.6)
        fit = exp_fit(t, v)
        assert fit.success
        assert fit.a == pytest.approx(9.5, abs=1e-6)
        assert fit.lam == pytest.approx(3.7, abs=1e-6)
        assert fit.c == pytest.approx(0.6, abs=1e-6)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_noisy_recovery_within_ci(self):
        rng = np.random.default_rng(8)
        t = np.linspace(0.0, 10.0, 201)
        v = exp_model(t, 9.5, 3.7, 0.6) + 0.05 * rng.standard_normal(t.size)
        fit = exp_fit(t, v)
        assert fit.success
        assert abs(fit.lam - 3.7) < 3.0 * fit.ci_lam
        assert abs(fit.c - 0.6) < 3.0 * fit.ci_c

    def test_constant_series_reports_failure(self):
        t = np.linspace(0.0, 1.0, 20)
        fit = exp_fit(t, np.full(20, 2.5))
        assert not fit.success
        assert fit.c == pytest.approx(2.5)

    def test_growing_series_rejected_via_negative_rate(self):
        t = np.linspace(0.0, 5.0, 50)
        v = 1.0 + 0.5 * t  # no decaying component at all
        fit = exp_fit(t, v)
        assert not fit.success

    def test_fit_start_time_window(self):
        t = np.linspace(0.0, 10.0, 201)
        v = exp_model(t, 9.5, 3.7, 0.6)
        v[:10] = 20.0  # corrupt the early transient
        fit = exp_fit(t, v, fit_start_time=1.0)
        assert fit.success
        assert fit.lam == pytest.approx(3.7, rel=1e-4)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            exp_fit([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            exp_fit([0.0, 1.0, 1.0, 2.0], [1.0, 2.0, 3.0, 4.0])

    def test_jacobian_matches_finite_differences(self):
        t = np.linspace(0.0, 4.0, 30)
        p = np.array([9.5, 3.7, 0.6])
        J = exp_jacobian(t, *p)
        h = 1e-7
        for j in range(3):
            dp = np.zeros(3)
            dp[j] = h
            fd = (exp_model(t, *(p + dp)) - exp_model(t, *(p - dp))) / (2 * h)
            np.testing.assert_allclose(J[:, j], fd, rtol=1e-6, atol=1e-6)

    def test_gradient_vanishes_at_optimum(self):
        rng = np.random.default_rng(9)
        t = np.linspace(0.0, 10.0, 201)
        v = exp_model(t, 9.5, 3.7, 0.6) + 0.02 * rng.standard_normal(t.size)
        fit = exp_fit(t, v)
        r = exp_model(t, fit.a, fit.lam, fit.c) - v
        grad = exp_jacobian(t, fit.a, fit.lam, fit.c).T @ r
        assert np.abs(grad).max() < 1e-6 * np.abs(v).sum()


class TestPearson:
    def test_perfect_linear(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson(x, 2.0 * x + 3.0) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_hand_value(self):
        # x = (1,2,3,4), y = (1,3,2,4): covariance 4/4, sd product 5/4
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_affine_invariance(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=50)
        y = rng.normal(size=50)
        r1 = pearson(x, y)
        r2 = pearson(3.0 * x - 1.0, 0.5 * y + 7.0)
        assert r1 == pytest.approx(r2, abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_validation(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])


class TestRmseVsDivergence:
    def _series(self, rmse, deps):
        times = np.arange(len(rmse)) * 0.05
        from filterstab.metrics import DivergenceSeries, ErrorSeries

        e2 = np.asarray(rmse, dtype=float)[None] ** 2
        err = ErrorSeries(times=times, e2=e2, e2_mean=e2[0],
                          s2=np.zeros_like(e2), s2_mean=np.zeros(len(rmse)),
                          rmse=np.asarray(rmse, dtype=float))
        div = DivergenceSeries(times=times,
                               per_realization=np.asarray(deps, dtype=float)[None],
                               mean=np.asarray(deps, dtype=float))
        return err, div

    def test_proportional_series(self):
        deps = np.array([8.0, 4.0, 2.0, 1.0, 0.5])
        err, div = self._series(0.5 * deps, deps)
        corr = rmse_vs_divergence(err, div)
        assert corr.pearson_r == pytest.approx(1.0)
        assert corr.slope == pytest.approx(0.5)
        assert corr.intercept == pytest.approx(0.0, abs=1e-12)
        assert corr.r2 == pytest.approx(1.0)

    def test_constant_rmse_undefined(self):
        err, div = self._series([1.0, 1.0, 1.0], [3.0, 2.0, 1.0])
        with pytest.raises(UndefinedCorrelationError):
            rmse_vs_divergence(err, div)

    def test_misaligned_times(self):
        err, _ = self._series([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
        _, div = self._series([1.0, 2.0], [3.0, 2.0])
        with pytest.raises(ValueError):
            rmse_vs_divergence(err, div)
