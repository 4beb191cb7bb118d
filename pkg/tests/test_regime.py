"""Tests for transition matrices, filtering, state sampling, probit updates.

The filter and backward sampler are checked against a brute-force
enumeration over all binary state paths, which is tractable for T <= 6.
"""

import itertools

import numpy as np
import pytest
from scipy.special import ndtr

from msfavar.core import (
    DegenerateLikelihoodError,
    ValidationError,
    quarter_range,
    seeded_stream,
)
from msfavar.regime import (
    ProbitParams,
    RegimePath,
    deterministic_states,
    hamilton_filter,
    sample_states_ffbs,
    stationary_distribution,
    transition_matrix,
    transition_matrix_path,
    update_probit,
)


def _enumerate_joint(lik, trans, init):
    """Exact joint posterior over all 2^T state paths, plus log evidence."""
    t_len = lik.shape[0]
    paths = list(itertools.product((0, 1), repeat=t_len))
    weights = np.empty(len(paths))
    for i, path in enumerate(paths):
        w = init[path[0]] * lik[0, path[0]]
        for t in range(1, t_len):
            w *= trans[t, path[t - 1], path[t]] * lik[t, path[t]]
        weights[i] = w
    total = weights.sum()
    return paths, weights / total, np.log(total)


def _filtered_by_enumeration(lik, trans, init):
    """Filtered marginals: enumerate the truncated problem at each horizon."""
    t_len = lik.shape[0]
    out = np.empty((t_len, 2))
    for t in range(t_len):
        paths, post, _ = _enumerate_joint(lik[: t + 1], trans[: t + 1], init)
        for k in (0, 1):
            out[t, k] = sum(p for path, p in zip(paths, post) if path[-1] == k)
    return out


def _random_fixture(stream, t_len):
    lik = stream.uniform(0.2, 2.0, size=(t_len, 2))
    p_one = stream.uniform(0.05, 0.95, size=(t_len, 2))
    trans = np.empty((t_len, 2, 2))
    trans[:, :, 1] = p_one
    trans[:, :, 0] = 1.0 - p_one
    init = stationary_distribution(trans[0])
    return lik, trans, init


class TestTransitionMatrix:
    def test_neutral_coefficients_give_half(self):
        probit = ProbitParams(c0=(0.0, 0.0), gamma=0.0)
        mat = transition_matrix(probit, 3.7)
        assert np.array_equal(mat, np.full((2, 2), 0.5))

    def test_unit_slope_at_95th_percentile(self):
        probit = ProbitParams(c0=(0.0, 0.0), gamma=1.0)
        mat = transition_matrix(probit, 1.6449)
        assert mat[0, 1] == pytest.approx(0.95, abs=1e-4)
        assert mat[1, 1] == pytest.approx(0.95, abs=1e-4)

    def test_strong_negative_slope_pins_state_zero(self):
        probit = ProbitParams(c0=(0.0, 0.0), gamma=-10.0)
        mat = transition_matrix(probit, 3.0)
        assert mat[0, 1] < 1e-6
        assert mat[1, 1] < 1e-6

    def test_rows_are_probability_vectors(self):
        stream = seeded_stream(404)
        for _ in range(50):
            probit = ProbitParams(
                c0=tuple(stream.normal(0, 3, size=2)),
                gamma=stream.normal(0, 3),
            )
            mat = transition_matrix(probit, stream.normal(0, 5))
            assert np.all(mat >= 0.0) and np.all(mat <= 1.0)
            np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-12)

    def test_path_builder_matches_scalar(self):
        stream = seeded_stream(405)
        probit = ProbitParams(c0=(-0.4, 0.9), gamma=1.3)
        rates = stream.normal(0, 2, size=17)
        stacked = transition_matrix_path(probit, rates)
        for t, rate in enumerate(rates):
            np.testing.assert_array_equal(stacked[t], transition_matrix(probit, rate))

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            ProbitParams(c0=(0.0, np.nan), gamma=1.0)
        with pytest.raises(ValidationError):
            ProbitParams(c0=(0.0, 0.0), gamma=np.inf)
        with pytest.raises(ValidationError):
            transition_matrix(ProbitParams(c0=(0.0, 0.0), gamma=1.0), np.nan)


class TestStationaryDistribution:
    def test_known_matrix(self):
        dist = stationary_distribution(np.array([[0.9, 0.1], [0.2, 0.8]]))
        np.testing.assert_allclose(dist, [2.0 / 3.0, 1.0 / 3.0], atol=1e-14)

    def test_is_invariant(self):
        stream = seeded_stream(406)
        for _ in range(25):
            p_one = stream.uniform(0.01, 0.99, size=2)
            mat = np.array([[1 - p_one[0], p_one[0]], [1 - p_one[1], p_one[1]]])
            dist = stationary_distribution(mat)
            np.testing.assert_allclose(dist @ mat, dist, atol=1e-14)
            assert dist.sum() == pytest.approx(1.0, abs=1e-14)

    def test_identity_falls_back_to_symmetric(self):
        np.testing.assert_array_equal(
            stationary_distribution(np.eye(2)), [0.5, 0.5]
        )


class TestHamiltonFilter:
    def test_absorbing_start(self):
        stream = seeded_stream(407)
        t_len = 9
        lik = stream.uniform(0.1, 3.0, size=(t_len, 2))
        trans = np.broadcast_to(np.eye(2), (t_len, 2, 2)).copy()
        filtered, _ = hamilton_filter(lik, trans, np.array([1.0, 0.0]))
        np.testing.assert_array_equal(filtered, np.tile([1.0, 0.0], (t_len, 1)))

    def test_symmetric_problem_stays_half(self):
        t_len = 7
        lik = np.tile(np.array([[0.8, 0.8]]), (t_len, 1))
        trans = np.full((t_len, 2, 2), 0.5)
        filtered, _ = hamilton_filter(lik, trans, np.array([0.5, 0.5]))
        np.testing.assert_allclose(filtered, 0.5, atol=1e-14)

    def test_matches_path_enumeration(self):
        stream = seeded_stream(408)
        for _ in range(5):
            lik, trans, init = _random_fixture(stream, 6)
            filtered, loglik = hamilton_filter(lik, trans, init)
            np.testing.assert_allclose(
                filtered, _filtered_by_enumeration(lik, trans, init), atol=1e-12
            )
            _, _, log_evidence = _enumerate_joint(lik, trans, init)
            assert loglik == pytest.approx(log_evidence, abs=1e-12)

    def test_row_scaling_shifts_loglik_only(self):
        stream = seeded_stream(409)
        lik, trans, init = _random_fixture(stream, 6)
        filtered, base = hamilton_filter(lik, trans, init)
        scaled = lik.copy()
        scaled[3] *= 37.5
        filtered_s, shifted = hamilton_filter(scaled, trans, init)
        np.testing.assert_allclose(filtered_s, filtered, atol=1e-12)
        assert shifted == pytest.approx(base + np.log(37.5), abs=1e-12)

    def test_zero_row_raises(self):
        stream = seeded_stream(410)
        lik, trans, init = _random_fixture(stream, 5)
        lik[2] = 0.0
        with pytest.raises(DegenerateLikelihoodError):
            hamilton_filter(lik, trans, init)

    def test_rejects_bad_input(self):
        stream = seeded_stream(411)
        lik, trans, init = _random_fixture(stream, 5)
        bad = lik.copy()
        bad[1, 0] = -0.5
        with pytest.raises(ValidationError):
            hamilton_filter(bad, trans, init)
        bad = lik.copy()
        bad[1, 0] = np.nan
        with pytest.raises(ValidationError):
            hamilton_filter(bad, trans, init)
        with pytest.raises(ValidationError):
            hamilton_filter(lik, trans, np.array([0.7, 0.7]))


class TestBackwardSampling:
    def test_degenerate_filter_forces_path(self):
        t_len = 8
        filtered = np.tile([1.0, 0.0], (t_len, 1))
        trans = np.broadcast_to(np.eye(2), (t_len, 2, 2)).copy()
        states = sample_states_ffbs(filtered, trans, seeded_stream(412))
        assert np.array_equal(states, np.zeros(t_len, dtype=int))

    def test_same_seed_same_path(self):
        stream_a = seeded_stream(413)
        stream_b = seeded_stream(413)
        lik, trans, init = _random_fixture(seeded_stream(414), 6)
        filtered, _ = hamilton_filter(lik, trans, init)
        path_a = sample_states_ffbs(filtered, trans, stream_a)
        path_b = sample_states_ffbs(filtered, trans, stream_b)
        assert np.array_equal(path_a, path_b)

    def test_joint_distribution_matches_enumeration(self):
        lik, trans, init = _random_fixture(seeded_stream(415), 5)
        filtered, _ = hamilton_filter(lik, trans, init)
        paths, exact, _ = _enumerate_joint(lik, trans, init)
        index = {path: i for i, path in enumerate(paths)}
        counts = np.zeros(len(paths))
        n_draws = 100_000
        stream = seeded_stream(416)
        for _ in range(n_draws):
            drawn = sample_states_ffbs(filtered, trans, stream)
            counts[index[tuple(drawn)]] += 1
        empirical = counts / n_draws
        total_variation = 0.5 * np.abs(empirical - exact).sum()
        assert total_variation < 0.01


class TestProbitUpdate:
    @staticmethod
    def _simulate_states(stream, t_len, c0, gamma):
        rates = stream.uniform(-2.0, 2.0, size=t_len)
        states = np.zeros(t_len, dtype=np.int64)
        for t in range(1, t_len):
            p_one = ndtr(c0[states[t - 1]] + gamma * rates[t - 1])
            states[t] = 1 if stream.random() < p_one else 0
        return states, rates

    def test_recovers_positive_slope(self):
        sim_stream = seeded_stream(417)
        states, rates = self._simulate_states(sim_stream, 400, (-1.0, -1.0), 2.0)
        assert 0 < states.sum() < states.size
        draw_stream = seeded_stream(418)
        gammas = np.array(
            [
                update_probit(states, rates, 10.0, draw_stream).gamma
                for _ in range(200)
            ]
        )
        assert abs(gammas.mean() - 2.0) < 0.5
        assert (gammas > 0).mean() > 0.99

    def test_unvisited_state_keeps_prior(self):
        states = np.zeros(60, dtype=np.int64)
        rates = seeded_stream(419).normal(0, 1, size=60)
        stream = seeded_stream(420)
        variance = 10.0
        draws = np.array(
            [
                update_probit(states, rates, variance, stream, n_iter=1).c0[1]
                for _ in range(2000)
            ]
        )
        assert abs(draws.mean()) < 3 * np.sqrt(variance / draws.size)
        assert abs(draws.var() - variance) < 1.2

    def test_dogmatic_prior_collapses_to_zero(self):
        sim_stream = seeded_stream(421)
        states, rates = self._simulate_states(sim_stream, 200, (0.5, -0.5), 1.5)
        drawn = update_probit(states, rates, 1e-8, seeded_stream(422))
        assert abs(drawn.gamma) < 1e-3
        assert abs(drawn.c0[0]) < 1e-3

    def test_warm_start_is_deterministic(self):
        sim_stream = seeded_stream(423)
        states, rates = self._simulate_states(sim_stream, 80, (0.0, 0.0), 1.0)
        current = ProbitParams(c0=(0.3, -0.2), gamma=0.8)
        one = update_probit(states, rates, 10.0, seeded_stream(424), current=current)
        two = update_probit(states, rates, 10.0, seeded_stream(424), current=current)
        assert one == two

    def test_input_validation(self):
        rates = np.zeros(8)
        with pytest.raises(ValidationError):
            update_probit(np.zeros(8, dtype=int), rates, 10.0, seeded_stream(1))
        with pytest.raises(ValidationError):
            update_probit(np.full(20, 2), np.zeros(20), 10.0, seeded_stream(1))
        with pytest.raises(ValidationError):
            update_probit(np.zeros(20, dtype=int), np.zeros(19), 10.0, seeded_stream(1))
        with pytest.raises(ValidationError):
            update_probit(np.zeros(20, dtype=int), np.zeros(20), np.inf, seeded_stream(1))


class TestDeterministicStates:
    def test_gfc_break_counts(self):
        dates = quarter_range("2000Q1", "2018Q4")
        path = deterministic_states(dates, "2009Q1")
        assert path.n_periods == 76
        assert np.array_equal(path.states[:36], np.zeros(36, dtype=int))
        assert np.array_equal(path.states[36:], np.ones(40, dtype=int))
        np.testing.assert_array_equal(
            path.filtered_prob[np.arange(76), path.states], 1.0
        )
        np.testing.assert_allclose(
            path.transition_matrices.sum(axis=2), 1.0, atol=1e-12
        )

    def test_break_at_first_date_gives_all_ones(self):
        dates = quarter_range("2000Q1", "2003Q4")
        path = deterministic_states(dates, "2000Q1")
        assert np.array_equal(path.states, np.ones(16, dtype=int))

    def test_break_outside_sample_raises(self):
        dates = quarter_range("2000Q1", "2003Q4")
        with pytest.raises(ValidationError):
            deterministic_states(dates, "2004Q1")
        with pytest.raises(ValidationError):
            deterministic_states(dates, "1999Q4")

    def test_filter_reproduces_break_path(self):
        dates = quarter_range("2001Q1", "2006Q4")
        path = deterministic_states(dates, "2004Q3")
        lik = seeded_stream(425).uniform(0.5, 1.5, size=(path.n_periods, 2))
        filtered, _ = hamilton_filter(
            lik, path.transition_matrices, path.filtered_prob[0]
        )
        np.testing.assert_allclose(filtered, path.filtered_prob, atol=1e-12)
        drawn = sample_states_ffbs(
            filtered, path.transition_matrices, seeded_stream(426)
        )
        assert np.array_equal(drawn, path.states)


class TestRegimePathValidation:
    def test_rejects_bad_rows(self):
        states = np.array([0, 1, 0])
        good_f = np.array([[1.0, 0.0], [0.2, 0.8], [0.6, 0.4]])
        good_t = np.tile(np.array([[0.7, 0.3], [0.4, 0.6]]), (3, 1, 1))
        RegimePath(states=states, filtered_prob=good_f, transition_matrices=good_t)
        bad_f = good_f.copy()
        bad_f[1] = [0.3, 0.8]
        with pytest.raises(ValidationError):
            RegimePath(states=states, filtered_prob=bad_f, transition_matrices=good_t)
        bad_t = good_t.copy()
        bad_t[2, 0] = [0.9, 0.2]
        with pytest.raises(ValidationError):
            RegimePath(states=states, filtered_prob=good_f, transition_matrices=bad_t)
        with pytest.raises(ValidationError):
            RegimePath(
                states=np.array([0, 2, 0]),
                filtered_prob=good_f,
                transition_matrices=good_t,
            )
