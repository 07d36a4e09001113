import math

import numpy as np
import pytest
from scipy import integrate

from causalcast.errors import InsufficientHistory, InvalidArgument, RankDeficient
from causalcast.stats import (
    benjamini_hochberg,
    f_cdf,
    ols,
    partial_correlation,
    t_cdf,
)


def f_pdf(x, d1, d2):
    log_num = (
        math.lgamma((d1 + d2) / 2.0)
        - math.lgamma(d1 / 2.0)
        - math.lgamma(d2 / 2.0)
        + (d1 / 2.0) * math.log(d1 / d2)
        + (d1 / 2.0 - 1.0) * math.log(x)
        - ((d1 + d2) / 2.0) * math.log(1.0 + d1 * x / d2)
    )
    return math.exp(log_num)


def t_pdf(x, dof):
    log_num = (
        math.lgamma((dof + 1) / 2.0)
        - math.lgamma(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
        - ((dof + 1) / 2.0) * math.log1p(x * x / dof)
    )
    return math.exp(log_num)


class TestOls:
    def test_exact_line_through_origin(self):
        x = np.array([[1.0], [2.0], [3.0]])
        y = np.array([2.0, 4.0, 6.0])
        fit = ols(x, y)
        np.testing.assert_allclose(fit.coefficients, [2.0], atol=1e-12)
        assert fit.rss == pytest.approx(0.0, abs=1e-20)

    def test_slope_three(self):
        x = np.arange(1.0, 11.0)[:, None]
        fit = ols(x, 3.0 * x[:, 0])
        np.testing.assert_allclose(fit.coefficients, [3.0], atol=1e-12)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 3))
        y = rng.standard_normal(50)
        fit = ols(X, y)
        beta = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(fit.coefficients, beta, atol=1e-8)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((200, 4))
        y = rng.standard_normal(200)
        fit = ols(X, y)
        assert np.abs(X.T @ fit.residuals).max() < 1e-8 * len(y)

    def test_rss_consistent_with_residuals(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 2))
        y = rng.standard_normal(30)
        fit = ols(X, y)
        assert fit.rss == pytest.approx(float(fit.residuals @ fit.residuals))

    def test_collinear_design_rejected(self):
        x = np.arange(1.0, 21.0)
        X = np.column_stack([x, 2.0 * x])
        with pytest.raises(RankDeficient):
            ols(X, x)

    def test_more_params_than_rows_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InsufficientHistory):
            ols(rng.standard_normal((3, 5)), rng.standard_normal(3))


class TestPartialCorrelation:
    def test_self_correlation_is_one(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(100)
        res = partial_correlation(x, x)
        assert res.statistic == pytest.approx(1.0)
        assert res.p_value < 1e-10

    def test_independent_series_not_significant(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal(10000)
        y = rng.standard_normal(10000)
        res = partial_correlation(x, y)
        assert abs(res.statistic) < 0.05
        assert res.p_value > 0.01

    def test_common_cause_explained_away(self):
        rng = np.random.default_rng(5)
        n = 5000
        z = rng.standard_normal(n)
        x = 0.8 * z + 0.3 * rng.standard_normal(n)
        y = 0.8 * z + 0.3 * rng.standard_normal(n)
        plain = partial_correlation(x, y)
        given_z = partial_correlation(x, y, z[:, None])
        assert plain.statistic > 0.3
        assert abs(given_z.statistic) < 0.05

    def test_dof_accounts_for_conditions(self):
        rng = np.random.default_rng(6)
        n = 50
        z = rng.standard_normal((n, 3))
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        res = partial_correlation(x, y, z)
        assert res.effective_dof == n - 3 - 2

    def test_constant_series_reports_independence(self):
        rng = np.random.default_rng(7)
        x = np.ones(100)
        y = rng.standard_normal(100)
        res = partial_correlation(x, y)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_affine_invariance(self):
        rng = np.random.default_rng(8)
        n = 400
        z = rng.standard_normal((n, 2))
        x = z @ [0.5, -0.2] + rng.standard_normal(n)
        y = z @ [0.1, 0.7] + rng.standard_normal(n)
        base = partial_correlation(x, y, z)
        scaled = partial_correlation(1000.0 * x - 3.0, 0.01 * y + 7.0, 5.0 * z + 2.0)
        assert scaled.statistic == pytest.approx(base.statistic, abs=1e-10)
        assert scaled.p_value == pytest.approx(base.p_value, abs=1e-10)

    def test_null_calibration(self):
        # p-values should be uniform under the null: ~5% below 0.05
        rng = np.random.default_rng(9)
        hits = 0
        trials = 1000
        for _ in range(trials):
            x = rng.standard_normal(80)
            y = rng.standard_normal(80)
            if partial_correlation(x, y).p_value < 0.05:
                hits += 1
        assert 0.03 <= hits / trials <= 0.07


class TestDistributions:
    def test_f_cdf_at_zero(self):
        assert f_cdf(0.0, 3, 7) == 0.0
        assert f_cdf(-1.5, 3, 7) == 0.0

    @pytest.mark.parametrize("d", [1, 2, 5, 20])
    def test_f_cdf_median_equal_dof(self, d):
        assert f_cdf(1.0, d, d) == pytest.approx(0.5, abs=1e-12)

    def test_f_cdf_against_quadrature(self):
        val, err = integrate.quad(f_pdf, 0.0, 3.0, args=(5, 10))
        assert err < 1e-8
        assert f_cdf(3.0, 5, 10) == pytest.approx(val, abs=1e-10)

    def test_t_cdf_at_zero(self):
        assert t_cdf(0.0, 5) == 0.5

    def test_t_cdf_against_quadrature(self):
        # integrate the finite half and use symmetry about zero
        for x, dof in [(1.3, 4), (-2.1, 9), (0.4, 30)]:
            half, err = integrate.quad(t_pdf, 0.0, abs(x), args=(dof,))
            assert err < 1e-12
            val = 0.5 + half if x > 0 else 0.5 - half
            assert t_cdf(x, dof) == pytest.approx(val, abs=1e-10)

    def test_t_cdf_symmetry(self):
        for x in (0.5, 1.0, 2.5):
            assert t_cdf(x, 7) + t_cdf(-x, 7) == pytest.approx(1.0, abs=1e-14)

    def test_invalid_arguments(self):
        with pytest.raises(InvalidArgument):
            f_cdf(1.0, 0, 5)
        with pytest.raises(InvalidArgument):
            f_cdf(math.nan, 5, 5)
        with pytest.raises(InvalidArgument):
            t_cdf(1.0, 0)


class TestBenjaminiHochberg:
    def test_all_tiny_all_rejected(self):
        mask = benjamini_hochberg([0.001] * 6, 0.05)
        assert mask.all()

    def test_all_large_none_rejected(self):
        mask = benjamini_hochberg([0.9] * 6, 0.05)
        assert not mask.any()

    def test_step_up_example(self):
        mask = benjamini_hochberg([0.01, 0.02, 0.04, 0.9], 0.05)
        assert mask.tolist() == [True, True, False, False]

    def test_order_invariance(self):
        p = [0.9, 0.04, 0.01, 0.02]
        mask = benjamini_hochberg(p, 0.05)
        assert mask.tolist() == [False, False, True, True]

    def test_empty_input(self):
        assert benjamini_hochberg([], 0.05).size == 0

    def test_invalid_inputs(self):
        with pytest.raises(InvalidArgument):
            benjamini_hochberg([0.5, 1.5], 0.05)
        with pytest.raises(InvalidArgument):
            benjamini_hochberg([0.5], 0.0)
