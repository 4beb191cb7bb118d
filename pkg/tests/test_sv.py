"""Tests for the stochastic-volatility sampler.

The mixture-indicator step is validated against exhaustive enumeration of
all 10^4 indicator combinations on a four-period problem, with the
log-variance path integrated out analytically.  The banded path draw is
validated against a dense-matrix reimplementation fed the same normals.
"""

import itertools

import numpy as np
import pytest
from scipy.linalg import cholesky as dense_cholesky
from scipy.linalg import solve_triangular
from scipy.special import digamma

from msfavar.core import (
    DegenerateSeriesError,
    InsufficientDataError,
    NumericalError,
    PriorConfig,
    ValidationError,
    seeded_stream,
)
from msfavar.sv import (
    OCSN_MEANS,
    OCSN_PROBS,
    OCSN_VARS,
    SvParams,
    ar_design,
    draw_logvar_path,
    draw_mixture_indicators,
    estimate_ar_sv,
    rolling_std_proxy,
    volatility_proxy,
)

PRIORS = PriorConfig.for_dimension(1)


def _simulate_sv(stream, t_len, rho, mu, phi, sigma_v):
    """Reference data generator for the AR(1)-with-SV model."""
    logvar = np.empty(t_len)
    logvar[0] = mu + sigma_v / np.sqrt(1 - phi**2) * stream.standard_normal()
    for t in range(1, t_len):
        logvar[t] = mu + phi * (logvar[t - 1] - mu) + sigma_v * stream.standard_normal()
    series = np.empty(t_len)
    series[0] = np.exp(logvar[0] / 2) * stream.standard_normal()
    for t in range(1, t_len):
        series[t] = rho * series[t - 1] + np.exp(logvar[t] / 2) * stream.standard_normal()
    return series, logvar


class TestMixtureConstants:
    def test_probabilities_sum_to_one(self):
        assert OCSN_PROBS.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_log_chi_squared_moments(self):
        # E[log chi2(1)] = digamma(1/2) + log 2, Var = pi^2 / 2
        mean = OCSN_PROBS @ OCSN_MEANS
        assert mean == pytest.approx(digamma(0.5) + np.log(2.0), abs=5e-4)
        second = OCSN_PROBS @ (OCSN_VARS + OCSN_MEANS**2)
        assert second - mean**2 == pytest.approx(np.pi**2 / 2, abs=5e-3)


class TestIndicatorDraws:
    def test_single_period_frequencies(self):
        ystar = np.array([-2.0])
        logvar = np.array([-1.0])
        centered = ystar[0] - logvar[0]
        log_w = (
            np.log(OCSN_PROBS)
            - 0.5 * np.log(OCSN_VARS)
            - 0.5 * (centered - OCSN_MEANS) ** 2 / OCSN_VARS
        )
        exact = np.exp(log_w - log_w.max())
        exact /= exact.sum()
        stream = seeded_stream(501)
        counts = np.zeros(10)
        n_draws = 20000
        for _ in range(n_draws):
            counts[draw_mixture_indicators(ystar, logvar, stream)[0]] += 1
        total_variation = 0.5 * np.abs(counts / n_draws - exact).sum()
        assert total_variation < 0.02

    def test_joint_path_matches_enumeration(self):
        mu, phi, sigma2 = -1.0, 0.8, 0.5
        ystar = np.array([-0.5, -3.0, 0.5, -6.0])
        t_len = 4

        # exact posterior over indicator combinations, path integrated out
        lag = np.abs(np.arange(t_len)[:, None] - np.arange(t_len)[None, :])
        prior_cov = sigma2 / (1 - phi**2) * phi**lag
        combos = np.array(list(itertools.product(range(10), repeat=t_len)))
        resid = ystar[None, :] - mu - OCSN_MEANS[combos]
        cov = np.broadcast_to(prior_cov, (combos.shape[0], t_len, t_len)).copy()
        idx = np.arange(t_len)
        cov[:, idx, idx] += OCSN_VARS[combos]
        _, logdet = np.linalg.slogdet(cov)
        quad = np.einsum(
            "ij,ij->i", resid, np.linalg.solve(cov, resid[:, :, None])[:, :, 0]
        )
        log_post = np.log(OCSN_PROBS)[combos].sum(axis=1) - 0.5 * logdet - 0.5 * quad
        exact = np.exp(log_post - log_post.max())
        exact /= exact.sum()

        stream = seeded_stream(502)
        logvar = np.full(t_len, mu)
        weights = np.array([1000, 100, 10, 1])
        counts = np.zeros(10**t_len)
        n_draws = 50000
        for sweep in range(1000 + n_draws):
            indicators = draw_mixture_indicators(ystar, logvar, stream)
            logvar = draw_logvar_path(ystar, indicators, mu, phi, sigma2, stream)
            if sweep >= 1000:
                counts[indicators @ weights] += 1
        total_variation = 0.5 * np.abs(counts / n_draws - exact).sum()
        assert total_variation < 0.05


class TestPathDraw:
    def test_matches_dense_route(self):
        stream = seeded_stream(503)
        n = 30
        mu, phi, sigma2 = -0.5, 0.8, 0.3
        ystar = stream.normal(-1.5, 2.0, size=n)
        indicators = stream.integers(0, 10, size=n)

        precision = np.zeros((n, n))
        precision[idx := np.arange(n), idx] = (1 + phi**2) / sigma2
        precision[0, 0] = 1.0 / sigma2
        precision[-1, -1] = 1.0 / sigma2
        precision[idx[:-1], idx[:-1] + 1] = -phi / sigma2
        precision[idx[:-1] + 1, idx[:-1]] = -phi / sigma2
        obs_prec = 1.0 / OCSN_VARS[indicators]
        precision[idx, idx] += obs_prec
        rhs = obs_prec * (ystar - OCSN_MEANS[indicators] - mu)
        mean = np.linalg.solve(precision, rhs)
        upper = dense_cholesky(precision)
        z = seeded_stream(504).standard_normal(n)
        reference = mu + mean + solve_triangular(upper, z)

        drawn = draw_logvar_path(
            ystar, indicators, mu, phi, sigma2, seeded_stream(504)
        )
        np.testing.assert_allclose(drawn, reference, atol=1e-10)


class TestEstimation:
    def test_recovers_volatility_path_and_phi(self):
        series, true_logvar = _simulate_sv(seeded_stream(505), 500, 0.5, -1.0, 0.9, 0.3)
        params, draws = estimate_ar_sv(series, 1, PRIORS, 1500, 500, seeded_stream(506))
        corr = np.corrcoef(params.logvar_path[1:], true_logvar[1:])[0, 1]
        assert corr >= 0.8
        assert abs(params.phi - 0.9) <= 0.1
        assert abs(params.rho[0] - 0.5) < 0.15
        assert np.all(np.abs(draws["phi"]) < 1.0)
        assert np.all(draws["sigma2_v"] > 0.0)

    def test_white_noise_gives_flat_path(self):
        series = seeded_stream(507).standard_normal(400)
        params, _ = estimate_ar_sv(series, 1, PRIORS, 1000, 500, seeded_stream(508))
        smoothed_var = np.exp(params.logvar_path)
        assert smoothed_var.max() / smoothed_var.min() < 2.0

    def test_early_entries_backfilled(self):
        series = seeded_stream(509).standard_normal(80)
        params, draws = estimate_ar_sv(series, 5, PRIORS, 50, 20, seeded_stream(510))
        for col in range(5):
            np.testing.assert_array_equal(
                draws["logvar"][:, col], draws["logvar"][:, 5]
            )
        assert np.all(params.logvar_path[:5] == params.logvar_path[5])

    def test_divergent_scale_raises(self):
        series = seeded_stream(511).standard_normal(120) * 3e13
        with pytest.raises(NumericalError, match="standardize"):
            estimate_ar_sv(series, 1, PRIORS, 1200, 300, seeded_stream(512))

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            estimate_ar_sv(np.zeros(24), 5, PRIORS, 10, 5, seeded_stream(1))
        with pytest.raises(InsufficientDataError):
            estimate_ar_sv(seeded_stream(2).standard_normal(10), 12, PRIORS, 10, 5, seeded_stream(1))

    def test_design_matrix_layout(self):
        series = np.arange(10.0)
        design, target = ar_design(series, 2)
        np.testing.assert_array_equal(target, series[2:])
        np.testing.assert_array_equal(design[:, 0], series[1:-1])
        np.testing.assert_array_equal(design[:, 1], series[:-2])


class TestProxy:
    @staticmethod
    def _break_series(stream, t_len=300):
        sd = np.where(np.arange(t_len) < t_len // 2, 0.5, 2.0)
        raw = sd * stream.standard_normal(t_len)
        return (raw - raw.mean()) / raw.std(ddof=1)

    def _spec(self):
        from msfavar.core import new_model_spec

        return new_model_spec(
            {
                "model": {
                    "p_lags": 1,
                    "q_factors": 1,
                    "m_endog": 2,
                    "regime_mode": "linear",
                    "sv_ar_order": 2,
                }
            }
        )

    def test_variance_break_raises_second_half(self):
        series = self._break_series(seeded_stream(513))
        proxy = volatility_proxy(series, self._spec(), seeded_stream(514), 600, 300)
        assert proxy.size == series.size
        assert proxy[150:].mean() > proxy[:150].mean()

    def test_same_seed_same_proxy(self):
        series = self._break_series(seeded_stream(515))
        spec = self._spec()
        first = volatility_proxy(series, spec, seeded_stream(516), 300, 150)
        second = volatility_proxy(series, spec, seeded_stream(516), 300, 150)
        np.testing.assert_array_equal(first, second)

    def test_constant_series_rejected(self):
        with pytest.raises(DegenerateSeriesError):
            volatility_proxy(np.full(120, 3.25), self._spec(), seeded_stream(517))

    def test_rolling_std_alternative(self):
        series = self._break_series(seeded_stream(518))
        proxy = rolling_std_proxy(series, window=8)
        assert proxy.size == series.size
        assert proxy[150:].mean() > proxy[:150].mean()
        np.testing.assert_array_equal(proxy[:7], proxy[7])
        with pytest.raises(InsufficientDataError):
            rolling_std_proxy(np.zeros(6), window=8)


class TestSvParamsValidation:
    def test_rejects_nonstationary_phi(self):
        with pytest.raises(ValidationError):
            SvParams(
                rho=np.array([0.5]), mu=0.0, phi=1.0, sigma2_v=0.1,
                logvar_path=np.zeros(10),
            )

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValidationError):
            SvParams(
                rho=np.array([0.5]), mu=0.0, phi=0.5, sigma2_v=0.0,
                logvar_path=np.zeros(10),
            )
