"""Tests for structural identification and impulse-response summaries.

Response computations are checked two independent ways: against explicit
matrix powers of a companion matrix assembled in the test, and against
the difference between shocked and baseline deterministic simulations of
the autoregression.  Percentile summaries are checked against plain
sorting.
"""

import numpy as np
import pytest

from msfavar.core import (
    DrawStore,
    ModelSpec,
    NumericalError,
    PriorConfig,
    ValidationError,
    seeded_stream,
)
from msfavar.irf import (
    IrfResult,
    companion_matrix,
    compute_irf,
    irf_long_table,
    peak_response,
    peak_table,
    structural_impact,
    summarize_irf,
    summarize_peaks,
)


def _spec(k, p=1, horizon=8, regime_mode="endogenous_markov"):
    """Model spec with n_vars == k built directly, skipping config checks."""
    endog = tuple(f"y{j}" for j in range(k - 1))
    return ModelSpec(
        p_lags=p,
        q_factors=1,
        m_endog=k - 1,
        endogenous=endog,
        ordering=("factor",) + endog,
        prior=PriorConfig.for_dimension(k),
        regime_mode=regime_mode,
        label_rule="none",
        horizon=horizon,
    )


def _random_spd(k, rng, scale=1.0):
    a = rng.standard_normal((k, k + 2))
    return scale * (a @ a.T / (k + 2) + 0.5 * np.eye(k))


def _random_coeffs(k, p, rng, lag_scale=0.3):
    """K x (K*P+1) coefficient matrix with a nonzero intercept column."""
    coeffs = lag_scale * rng.standard_normal((k, k * p + 1))
    coeffs[:, 0] = rng.standard_normal(k)
    return coeffs


def _test_companion(coeffs, k):
    """Companion matrix assembled blockwise, independent of the package."""
    p = (coeffs.shape[1] - 1) // k
    blocks = [coeffs[:, 1 + j * k:1 + (j + 1) * k] for j in range(p)]
    top = np.hstack(blocks)
    if p == 1:
        return top
    lower = np.hstack([np.eye(k * (p - 1)), np.zeros((k * (p - 1), k))])
    return np.vstack([top, lower])


def _make_store(beta, omega):
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return DrawStore(
        arrays={"beta": beta, "omega": omega},
        meta={"n_draws": beta.shape[0], "n_regimes": beta.shape[1]},
    )


class TestStructuralImpact:
    def test_identity_covariance(self):
        out = structural_impact(np.eye(3), ("a", "b", "c"))
        np.testing.assert_array_equal(out, np.eye(3))

    def test_hand_cholesky(self):
        out = structural_impact(np.array([[4.0, 2.0], [2.0, 5.0]]), ("a", "b"))
        np.testing.assert_allclose(out, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_reconstructs_random_spd(self):
        rng = seeded_stream(71)
        omega = _random_spd(5, rng)
        factor = structural_impact(omega, tuple("abcde"))
        np.testing.assert_allclose(factor @ factor.T, omega, atol=1e-12)

    def test_exactly_lower_triangular(self):
        rng = seeded_stream(72)
        factor = structural_impact(_random_spd(6, rng), tuple("abcdef"))
        upper = np.triu_indices(6, k=1)
        assert np.all(factor[upper] == 0.0)

    def test_rescaling_scales_factor_linearly(self):
        rng = seeded_stream(73)
        omega = _random_spd(4, rng)
        base = structural_impact(omega, tuple("abcd"))
        scaled = structural_impact(6.25 * omega, tuple("abcd"))
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-12)

    def test_indefinite_matrix_raises(self):
        with pytest.raises(NumericalError):
            structural_impact(np.diag([1.0, -1.0]), ("a", "b"))

    def test_asymmetric_matrix_raises(self):
        with pytest.raises(ValidationError):
            structural_impact(np.array([[1.0, 0.3], [0.0, 1.0]]), ("a", "b"))

    def test_ordering_length_mismatch_raises(self):
        with pytest.raises(ValidationError):
            structural_impact(np.eye(3), ("a", "b"))


class TestCompanionMatrix:
    def test_two_lag_layout(self):
        rng = seeded_stream(74)
        coeffs = _random_coeffs(2, 2, rng)
        comp = companion_matrix(coeffs, 2)
        np.testing.assert_array_equal(comp[:2, :2], coeffs[:, 1:3])
        np.testing.assert_array_equal(comp[:2, 2:], coeffs[:, 3:5])
        np.testing.assert_array_equal(comp[2:, :2], np.eye(2))
        np.testing.assert_array_equal(comp[2:, 2:], np.zeros((2, 2)))

    def test_flat_vector_matches_matrix_input(self):
        rng = seeded_stream(75)
        coeffs = _random_coeffs(3, 2, rng)
        np.testing.assert_array_equal(
            companion_matrix(coeffs.ravel(), 3), companion_matrix(coeffs, 3))

    def test_against_blockwise_assembly(self):
        rng = seeded_stream(76)
        coeffs = _random_coeffs(3, 3, rng)
        np.testing.assert_array_equal(
            companion_matrix(coeffs, 3), _test_companion(coeffs, 3))

    def test_bad_length_raises(self):
        with pytest.raises(ValidationError):
            companion_matrix(np.zeros(7), 2)
        with pytest.raises(ValidationError):
            companion_matrix(np.zeros((2, 2)), 2)


class TestComputeIrf:
    def test_zero_coefficients_give_impact_then_zero(self):
        impact = np.array([[2.0, 0.0], [1.0, 2.0]])
        out = compute_irf(np.zeros((2, 3)), impact, 4)
        np.testing.assert_array_equal(out[:, :, 0], impact)
        assert np.all(out[:, :, 1:] == 0.0)

    def test_hand_worked_single_lag(self):
        coeffs = np.array([[0.0, 0.5, 0.0], [0.0, 0.3, 0.2]])
        out = compute_irf(coeffs, np.eye(2), 2)
        assert out[1, 0, 1] == pytest.approx(0.3, abs=1e-14)
        # second horizon by hand: A1 @ A1
        assert out[1, 0, 2] == pytest.approx(0.5 * 0.3 + 0.2 * 0.3, abs=1e-14)
        assert out[0, 0, 1] == pytest.approx(0.5, abs=1e-14)
        assert out[0, 1, 1] == pytest.approx(0.0, abs=1e-14)

    def test_matrix_power_oracle(self):
        rng = seeded_stream(77)
        coeffs = _random_coeffs(3, 2, rng)
        impact = structural_impact(_random_spd(3, rng), ("a", "b", "c"))
        out = compute_irf(coeffs, impact, 7)
        comp = _test_companion(coeffs, 3)
        for h in range(8):
            expect = np.linalg.matrix_power(comp, h)[:3, :3] @ impact
            np.testing.assert_allclose(out[:, :, h], expect, atol=1e-12)

    def test_shocked_minus_baseline_simulation(self):
        rng = seeded_stream(78)
        k, p, hor = 2, 2, 9
        coeffs = _random_coeffs(k, p, rng)
        impact = structural_impact(_random_spd(k, rng), ("a", "b"))
        out = compute_irf(coeffs, impact, hor)

        def deterministic_path(shock):
            x = np.zeros((hor + 1 + p, k))
            for t in range(p, hor + 1 + p):
                acc = coeffs[:, 0].copy()
                for j in range(p):
                    acc += coeffs[:, 1 + j * k:1 + (j + 1) * k] @ x[t - 1 - j]
                if t == p:
                    acc += shock
                x[t] = acc
            return x[p:]

        baseline = deterministic_path(np.zeros(k))
        for j in range(k):
            shocked = deterministic_path(impact[:, j])
            np.testing.assert_allclose(
                (shocked - baseline).T, out[:, j, :], atol=1e-10)

    def test_negated_shock_negates_response(self):
        rng = seeded_stream(79)
        coeffs = _random_coeffs(2, 1, rng)
        impact = structural_impact(_random_spd(2, rng), ("a", "b"))
        out = compute_irf(coeffs, impact, 6)
        flipped = compute_irf(coeffs, -impact, 6)
        np.testing.assert_array_equal(flipped, -out)

    def test_explosive_coefficients_stay_finite(self):
        out = compute_irf(np.array([[0.0, 1.05]]), np.eye(1), 30)
        np.testing.assert_allclose(
            out[0, 0], 1.05 ** np.arange(31), rtol=1e-12)
        assert np.all(np.isfinite(out))

    def test_rescaled_impact_scales_responses(self):
        rng = seeded_stream(80)
        coeffs = _random_coeffs(2, 1, rng)
        impact = structural_impact(_random_spd(2, rng), ("a", "b"))
        np.testing.assert_allclose(
            compute_irf(coeffs, 2.5 * impact, 5),
            2.5 * compute_irf(coeffs, impact, 5), rtol=1e-12)

    def test_negative_horizon_raises(self):
        with pytest.raises(ValidationError):
            compute_irf(np.zeros((2, 3)), np.eye(2), -1)


class TestSummarizeIrf:
    def _random_store(self, n, n_reg, k, p, rng, lag_scale=0.3):
        beta = np.empty((n, n_reg, k * (k * p + 1)))
        omega = np.empty((n, n_reg, k, k))
        for d in range(n):
            for r in range(n_reg):
                beta[d, r] = _random_coeffs(k, p, rng, lag_scale).ravel()
                omega[d, r] = _random_spd(k, rng)
        return _make_store(beta, omega)

    def test_matches_per_draw_compute_irf(self):
        rng = seeded_stream(81)
        spec = _spec(2, p=2, horizon=6)
        store = self._random_store(15, 2, 2, 2, rng)
        result = summarize_irf(store, spec)
        assert result.responses.shape == (15, 2, 2, 2, 7)
        for d in (0, 7, 14):
            for r in (0, 1):
                impact = np.linalg.cholesky(store["omega"][d, r])
                direct = compute_irf(store["beta"][d, r], impact, 6)
                np.testing.assert_allclose(
                    result.responses[d, r], direct.transpose(1, 0, 2),
                    atol=1e-12)

    def test_identical_draws_collapse_bands(self):
        rng = seeded_stream(82)
        coeffs = _random_coeffs(2, 1, rng)
        omega = _random_spd(2, rng)
        beta = np.tile(coeffs.ravel(), (40, 1, 1))
        store = _make_store(beta, np.tile(omega, (40, 1, 1, 1)))
        result = summarize_irf(store, _spec(2, horizon=5))
        np.testing.assert_array_equal(result.band_low, result.median)
        np.testing.assert_array_equal(result.band_high, result.median)
        direct = compute_irf(coeffs, np.linalg.cholesky(omega), 5)
        np.testing.assert_allclose(
            result.median[0], direct.transpose(1, 0, 2), atol=1e-12)

    def test_rank_exact_percentiles(self):
        # 51 draws put the 16/50/84 points exactly on order statistics
        # 8, 25, and 42 of the sorted responses
        rng = seeded_stream(83)
        n = 51
        a = rng.uniform(-0.9, 0.9, size=n)
        var = rng.uniform(0.5, 2.0, size=n)
        store = _make_store(
            np.stack([np.zeros(n), a], axis=1)[:, None, :],
            var[:, None, None, None])
        spec = _spec(1, horizon=4)
        result = summarize_irf(store, spec)
        # accumulate powers by repeated multiplication so the per-draw
        # paths are bitwise identical and only the ranking is under test
        paths = np.empty((n, 5))
        power = np.ones(n)
        scale = np.sqrt(var)
        for h in range(5):
            paths[:, h] = power * scale
            power = power * a
        ranked = np.sort(paths, axis=0)
        np.testing.assert_array_equal(result.band_low[0, 0, 0], ranked[8])
        np.testing.assert_array_equal(result.median[0, 0, 0], ranked[25])
        np.testing.assert_array_equal(result.band_high[0, 0, 0], ranked[42])

    def test_interpolated_percentiles_against_sort(self):
        rng = seeded_stream(84)
        spec = _spec(2, horizon=3)
        store = self._random_store(1000, 1, 2, 1, rng)
        result = summarize_irf(store, spec)
        ranked = np.sort(result.responses, axis=0)

        def from_sort(q):
            pos = (1000 - 1) * q
            lo = int(np.floor(pos))
            frac = pos - lo
            return ranked[lo] + frac * (ranked[lo + 1] - ranked[lo])

        np.testing.assert_allclose(result.band_low, from_sort(0.16), atol=1e-12)
        np.testing.assert_allclose(result.median, from_sort(0.50), atol=1e-12)
        np.testing.assert_allclose(result.band_high, from_sort(0.84), atol=1e-12)
        assert np.all(result.band_low <= result.median)
        assert np.all(result.median <= result.band_high)

    def test_mean_is_pointwise_average(self):
        rng = seeded_stream(85)
        store = self._random_store(30, 2, 2, 1, rng)
        result = summarize_irf(store, _spec(2, horizon=4))
        np.testing.assert_allclose(
            result.mean, result.responses.mean(axis=0), atol=1e-14)

    def test_single_regime_mode_has_one_entry(self):
        rng = seeded_stream(86)
        store = self._random_store(12, 1, 2, 1, rng)
        result = summarize_irf(store, _spec(2, horizon=4, regime_mode="linear"))
        assert result.n_regimes == 1
        assert result.median.shape == (1, 2, 2, 5)

    def test_explosive_draw_diagnostic(self):
        a = np.array([0.5, 1.2, 0.9, 1.05, -1.3])
        beta = np.stack([np.zeros(5), a], axis=1)[:, None, :]
        store = _make_store(beta, np.ones((5, 1, 1, 1)))
        result = summarize_irf(store, _spec(1, horizon=3))
        assert result.n_explosive == (3,)

    def test_empty_store_raises(self):
        store = _make_store(np.empty((0, 1, 2)), np.empty((0, 1, 1, 1)))
        with pytest.raises(ValidationError):
            summarize_irf(store, _spec(1, horizon=3))

    def test_missing_block_raises(self):
        store = DrawStore(arrays={"beta": np.zeros((5, 1, 2))},
                          meta={"n_draws": 5, "n_regimes": 1})
        with pytest.raises(ValidationError):
            summarize_irf(store, _spec(1, horizon=3))

    def test_shape_mismatch_raises(self):
        store = _make_store(np.zeros((5, 1, 3)), np.ones((5, 1, 1, 1)))
        with pytest.raises(ValidationError):
            summarize_irf(store, _spec(1, horizon=3))


class TestPeakResponse:
    def test_interior_trough(self):
        entry = peak_response(
            np.array([0.1, -0.5, 0.3]),
            np.array([-0.2, -0.8, 0.1]),
            np.array([0.4, -0.1, 0.5]))
        assert entry.peak_value == -0.5
        assert entry.peak_quarter == 1
        assert entry.sign == "negative"
        assert entry.significant is True

    def test_band_covering_zero_is_insignificant(self):
        entry = peak_response(
            np.array([0.1, -0.5, 0.3]),
            np.array([-0.2, -0.8, 0.1]),
            np.array([0.4, 0.2, 0.5]))
        assert entry.peak_quarter == 1
        assert entry.significant is False
        assert entry.significant_any is True  # band excludes zero at h=2

    def test_all_zero_path(self):
        zeros = np.zeros(4)
        entry = peak_response(zeros, zeros, zeros)
        assert entry.peak_value == 0.0
        assert entry.peak_quarter == 0
        assert entry.sign == "positive"
        assert entry.significant is False
        assert entry.significant_any is False

    def test_magnitude_tie_takes_earliest(self):
        entry = peak_response(
            np.array([0.4, -0.4, 0.1]), np.full(3, -1.0), np.full(3, 1.0))
        assert entry.peak_value == 0.4
        assert entry.peak_quarter == 0
        assert entry.sign == "positive"

    def test_rescaling_preserves_quarter_and_significance(self):
        med = np.array([0.1, -0.5, 0.3])
        low = np.array([-0.2, -0.8, 0.1])
        high = np.array([0.4, -0.1, 0.5])
        base = peak_response(med, low, high)
        scaled = peak_response(3.0 * med, 3.0 * low, 3.0 * high)
        assert scaled.peak_quarter == base.peak_quarter
        assert scaled.significant == base.significant
        assert scaled.peak_value == pytest.approx(3.0 * base.peak_value)

    def test_too_short_path_raises(self):
        one = np.array([0.3])
        with pytest.raises(ValidationError):
            peak_response(one, one, one)

    def test_band_shape_mismatch_raises(self):
        with pytest.raises(ValidationError):
            peak_response(np.zeros(3), np.zeros(2), np.zeros(3))


class TestSummarizePeaks:
    def _result(self):
        # two regimes, two variables, horizons 0..3; only shock 0 varies
        median = np.zeros((2, 2, 2, 4))
        median[0, 0, 0] = [0.2, 0.6, -0.1, 0.0]
        median[0, 0, 1] = [0.1, -0.3, -0.7, 0.2]
        median[1, 0, 0] = [-0.4, 0.1, 0.0, 0.0]
        median[1, 0, 1] = [0.3, 0.3, -0.2, 0.1]
        low = median - 0.1
        high = median + 0.1
        return IrfResult(
            responses=median[None],
            median=median,
            band_low=low,
            band_high=high,
            mean=median + 0.05,
            variables=("factor", "policy"),
            horizon=3,
            n_explosive=(0, 0),
        )

    def test_entries_by_regime_and_variable(self):
        summary = summarize_peaks(self._result(), 0)
        assert summary.shock_name == "factor"
        first = summary.entries[0][0]
        assert first.peak_value == pytest.approx(0.6)
        assert first.peak_quarter == 1
        assert first.significant is True
        second = summary.entries[0][1]
        assert second.peak_value == pytest.approx(-0.7)
        assert second.sign == "negative"
        assert summary.entries[1][0].peak_value == pytest.approx(-0.4)
        assert summary.entries[1][0].peak_quarter == 0

    def test_tie_on_mean_free_path(self):
        summary = summarize_peaks(self._result(), "factor")
        entry = summary.entries[1][1]  # tie 0.3 at h=0 and h=1
        assert entry.peak_quarter == 0
        assert entry.peak_value == pytest.approx(0.3)

    def test_mean_peak_diagnostic(self):
        summary = summarize_peaks(self._result(), "factor")
        # mean path for regime 0, variable 0 is median + 0.05
        assert summary.entries[0][0].mean_peak_value == pytest.approx(0.65)

    def test_shock_by_name_matches_index(self):
        by_name = summarize_peaks(self._result(), "policy")
        by_index = summarize_peaks(self._result(), 1)
        assert by_name == by_index

    def test_unknown_shock_raises(self):
        with pytest.raises(ValidationError):
            summarize_peaks(self._result(), "oil")
        with pytest.raises(ValidationError):
            summarize_peaks(self._result(), 5)


class TestTables:
    def _result(self):
        rng = seeded_stream(87)
        spec = _spec(2, horizon=3)
        beta = np.empty((20, 2, 6))
        omega = np.empty((20, 2, 2, 2))
        for d in range(20):
            for r in range(2):
                beta[d, r] = _random_coeffs(2, 1, rng).ravel()
                omega[d, r] = _random_spd(2, rng)
        return summarize_irf(_make_store(beta, omega), spec), spec

    def test_long_table_layout(self):
        result, spec = self._result()
        table = irf_long_table(result)
        assert list(table.columns) == [
            "regime", "shock", "variable", "horizon", "p16", "p50", "p84"]
        assert len(table) == 2 * 2 * 2 * 4
        row = table[(table.regime == 1) & (table.shock == "factor")
                    & (table.variable == "y0") & (table.horizon == 2)]
        assert row.p50.iloc[0] == result.median[1, 0, 1, 2]
        assert row.p16.iloc[0] == result.band_low[1, 0, 1, 2]
        assert np.all(table.p16.to_numpy() <= table.p84.to_numpy())

    def test_peak_table_layout(self):
        result, _ = self._result()
        summary = summarize_peaks(result, "factor")
        table = peak_table(summary)
        assert len(table) == 4
        assert set(table.shock) == {"factor"}
        row = table[(table.regime == 0) & (table.variable == "y0")].iloc[0]
        entry = summary.entries[0][1]
        assert row.peak_value == entry.peak_value
        assert row.peak_quarter == entry.peak_quarter
        assert row.sign == entry.sign
