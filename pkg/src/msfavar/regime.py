"""Two-state regime machinery.

Probit-linked time-varying transition matrices, the Hamilton filter,
forward-filter backward-sampling of state paths, Bayesian probit
coefficient updates via latent-utility augmentation (Albert and Chib,
1993), and a deterministic single-break alternative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

from .core import (
    DegenerateLikelihoodError,
    Quarter,
    ValidationError,
)

_ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class ProbitParams:
    """Coefficients of the transition probit.

    ``c0`` holds the two state-conditional intercepts (index = state being
    left), ``gamma`` the interest-rate slope shared across both rows.
    """

    c0: tuple
    gamma: float

    def __post_init__(self):
        try:
            c0 = tuple(float(v) for v in self.c0)
        except (TypeError, ValueError) as exc:
            raise ValidationError("c0 must be a pair of reals") from exc
        if len(c0) != 2:
            raise ValidationError("c0 must have exactly two entries")
        gamma = float(self.gamma)
        if not (np.isfinite(c0[0]) and np.isfinite(c0[1]) and np.isfinite(gamma)):
            raise ValidationError("probit coefficients must be finite")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "gamma", gamma)

    def as_vector(self) -> np.ndarray:
        """Stack as (c0[0], c0[1], gamma)."""
        return np.array([self.c0[0], self.c0[1], self.gamma], dtype=float)


@dataclass(frozen=True)
class RegimePath:
    """One realization of the regime allocation over the sample.

    ``states`` is the drawn path, ``filtered_prob`` the filter output it was
    drawn through, and ``transition_matrices`` the per-period transition
    matrices in effect (entry t governs the move from t-1 to t; entry 0 is
    only used through the initial distribution).
    """

    states: np.ndarray
    filtered_prob: np.ndarray
    transition_matrices: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        filtered = np.asarray(self.filtered_prob, dtype=float)
        trans = np.asarray(self.transition_matrices, dtype=float)
        if states.ndim != 1 or states.size == 0:
            raise ValidationError("states must be a non-empty vector")
        t_len = states.size
        if filtered.shape != (t_len, 2):
            raise ValidationError(
                f"filtered_prob must have shape ({t_len}, 2), got {filtered.shape}"
            )
        if trans.shape != (t_len, 2, 2):
            raise ValidationError(
                f"transition_matrices must have shape ({t_len}, 2, 2), got {trans.shape}"
            )
        if not np.all((states == 0) | (states == 1)):
            raise ValidationError("states must take values in {0, 1}")
        for name, arr in (("filtered_prob", filtered), ("transition_matrices", trans)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            if np.any(arr < -_ROW_SUM_TOL) or np.any(arr > 1.0 + _ROW_SUM_TOL):
                raise ValidationError(f"{name} entries must lie in [0, 1]")
            sums = arr.sum(axis=-1)
            if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
                raise ValidationError(f"{name} rows must sum to 1")
        for arr in (states, filtered, trans):
            arr.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "filtered_prob", filtered)
        object.__setattr__(self, "transition_matrices", trans)

    @property
    def n_periods(self) -> int:
        return self.states.size


# Probit indexes beyond +/-8 map to switch probabilities below float
# resolution; 1 - Phi then rounds to exactly zero and the filter can see
# an absorbing state that the model does not contain.  Clipping keeps
# every transition probability strictly positive (>= ~6e-16).
_PROBIT_INDEX_BOUND = 8.0


def transition_matrix(probit: ProbitParams, interest_rate: float) -> np.ndarray:
    """2x2 transition matrix at one interest-rate value.

    Row k is the distribution of the next state given current state k:
    the probability of moving to state 1 is Phi(c0[k] + gamma * rate).
    """
    rate = float(interest_rate)
    if not np.isfinite(rate):
        raise ValidationError("interest rate must be finite")
    index = np.array(probit.c0) + probit.gamma * rate
    p_one = ndtr(np.clip(index, -_PROBIT_INDEX_BOUND, _PROBIT_INDEX_BOUND))
    return np.column_stack([1.0 - p_one, p_one])


def transition_matrix_path(probit: ProbitParams, interest_rates) -> np.ndarray:
    """Vectorized transition matrices along a rate path, shape (T, 2, 2).

    Entry t is the matrix governing the move into period t; the caller is
    responsible for feeding the appropriately lagged rate at each slot.
    """
    rates = np.asarray(interest_rates, dtype=float)
    if rates.ndim != 1 or rates.size == 0:
        raise ValidationError("interest_rates must be a non-empty vector")
    if not np.all(np.isfinite(rates)):
        raise ValidationError("interest rates must be finite")
    index = np.array(probit.c0)[None, :] + probit.gamma * rates[:, None]
    p_one = ndtr(np.clip(index, -_PROBIT_INDEX_BOUND, _PROBIT_INDEX_BOUND))
    out = np.empty((rates.size, 2, 2))
    out[:, :, 1] = p_one
    out[:, :, 0] = 1.0 - p_one
    return out


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Invariant distribution of a 2x2 stochastic matrix.

    Both-states-absorbing (identity) input has every distribution invariant;
    the symmetric (0.5, 0.5) is returned in that case.
    """
    mat = np.asarray(matrix, dtype=float)
    if mat.shape != (2, 2):
        raise ValidationError("transition matrix must be 2x2")
    move_01 = mat[0, 1]
    move_10 = mat[1, 0]
    total = move_01 + move_10
    if total <= 0.0:
        return np.array([0.5, 0.5])
    return np.array([move_10 / total, move_01 / total])


def hamilton_filter(likelihoods, transition_matrices, initial_prob):
    """Forward filtering of a two-state chain with per-period transitions.

    ``likelihoods`` is (T, 2) with state-conditional data densities,
    ``transition_matrices`` is (T, 2, 2) where entry t moves t-1 to t, and
    ``initial_prob`` is the time-0 prior over states.  Returns the (T, 2)
    filtered probabilities and the log marginal likelihood accumulated from
    the per-period normalizing constants.
    """
    lik = np.asarray(likelihoods, dtype=float)
    trans = np.asarray(transition_matrices, dtype=float)
    init = np.asarray(initial_prob, dtype=float)
    if lik.ndim != 2 or lik.shape[1] != 2 or lik.shape[0] == 0:
        raise ValidationError("likelihoods must have shape (T, 2) with T >= 1")
    t_len = lik.shape[0]
    if trans.shape != (t_len, 2, 2):
        raise ValidationError(
            f"transition_matrices must have shape ({t_len}, 2, 2), got {trans.shape}"
        )
    if init.shape != (2,):
        raise ValidationError("initial_prob must be a 2-vector")
    if not np.all(np.isfinite(lik)) or np.any(lik < 0.0):
        raise ValidationError("likelihood entries must be finite and non-negative")
    if not np.all(np.isfinite(init)) or np.any(init < 0.0) or abs(init.sum() - 1.0) > 1e-8:
        raise ValidationError("initial_prob must be a probability vector")
    dead = np.flatnonzero(~np.any(lik > 0.0, axis=1))
    if dead.size:
        raise DegenerateLikelihoodError(
            f"all-zero likelihood row at period {dead[0]}"
        )
    filtered = np.empty((t_len, 2))
    log_marginal = 0.0
    predicted = init
    for t in range(t_len):
        if t > 0:
            predicted = trans[t].T @ filtered[t - 1]
        joint = predicted * lik[t]
        norm = joint[0] + joint[1]
        if not np.isfinite(norm) or norm <= 0.0:
            raise DegenerateLikelihoodError(f"filter mass vanished at period {t}")
        filtered[t] = joint / norm
        log_marginal += np.log(norm)
    return filtered, float(log_marginal)


def sample_states_ffbs(filtered_prob, transition_matrices, stream) -> np.ndarray:
    """Backward draw of a full state path from the joint smoothing law.

    The terminal state comes from the last filtered row; earlier states are
    drawn conditional on the successor, reweighting the filtered row by the
    relevant transition column.
    """
    filtered = np.asarray(filtered_prob, dtype=float)
    trans = np.asarray(transition_matrices, dtype=float)
    if filtered.ndim != 2 or filtered.shape[1] != 2 or filtered.shape[0] == 0:
        raise ValidationError("filtered_prob must have shape (T, 2) with T >= 1")
    t_len = filtered.shape[0]
    if trans.shape != (t_len, 2, 2):
        raise ValidationError(
            f"transition_matrices must have shape ({t_len}, 2, 2), got {trans.shape}"
        )
    uniforms = stream.random(t_len)
    states = np.empty(t_len, dtype=np.int64)
    states[t_len - 1] = 1 if uniforms[t_len - 1] < filtered[t_len - 1, 1] else 0
    for t in range(t_len - 2, -1, -1):
        successor = states[t + 1]
        weights = filtered[t] * trans[t + 1, :, successor]
        total = weights[0] + weights[1]
        if not np.isfinite(total) or total <= 0.0:
            raise DegenerateLikelihoodError(
                f"backward weights vanished at period {t}"
            )
        states[t] = 1 if uniforms[t] < weights[1] / total else 0
    return states


def update_probit(
    states,
    interest_rates,
    prior_variance,
    stream,
    current: ProbitParams | None = None,
    n_iter: int = 40,
) -> ProbitParams:
    """Draw probit coefficients given a realized state path.

    Latent-utility augmentation after Albert and Chib (1993): each observed
    transition out of period t-1 contributes a truncated-normal utility, and
    the coefficient vector (c0[0], c0[1], gamma) gets a Gaussian conditional
    update under its zero-mean prior with ``prior_variance`` per coefficient.
    The intercept c0[k] loads only on rows leaving state k; gamma loads on
    every row through the lagged rate.

    Starting from ``current`` (or zeros), ``n_iter`` augmentation sweeps are
    run and the final coefficient draw is returned.  A state never visited
    leaves its intercept at the prior, which is the correct conditional.
    """
    path = np.asarray(states)
    rates = np.asarray(interest_rates, dtype=float)
    if path.ndim != 1 or rates.ndim != 1 or path.size != rates.size:
        raise ValidationError("states and interest_rates must be equal-length vectors")
    if path.size < 10:
        raise ValidationError("probit update needs at least 10 periods")
    if not np.all((path == 0) | (path == 1)):
        raise ValidationError("states must take values in {0, 1}")
    if not np.all(np.isfinite(rates)):
        raise ValidationError("interest rates must be finite")
    variance = float(prior_variance)
    if not np.isfinite(variance) or variance <= 0.0:
        raise ValidationError("prior variance must be finite and positive")

    origin = path[:-1]
    arrived_one = path[1:] == 1
    n_rows = origin.size
    design = np.empty((n_rows, 3))
    design[:, 0] = origin == 0
    design[:, 1] = origin == 1
    design[:, 2] = rates[:-1]
    rows_one = np.flatnonzero(arrived_one)
    rows_zero = np.flatnonzero(~arrived_one)

    precision = np.eye(3) / variance + design.T @ design
    chol = np.linalg.cholesky(precision)
    beta = np.zeros(3) if current is None else current.as_vector()
    latent = np.empty(n_rows)
    for _ in range(max(1, int(n_iter))):
        center = design @ beta
        if rows_one.size:
            latent[rows_one] = truncnorm.rvs(
                -center[rows_one], np.inf, loc=center[rows_one], random_state=stream
            )
        if rows_zero.size:
            latent[rows_zero] = truncnorm.rvs(
                -np.inf, -center[rows_zero], loc=center[rows_zero], random_state=stream
            )
        mean = np.linalg.solve(precision, design.T @ latent)
        shock = np.linalg.solve(chol.T, stream.standard_normal(3))
        beta = mean + shock
    return ProbitParams(c0=(beta[0], beta[1]), gamma=beta[2])


def deterministic_states(dates, break_date) -> RegimePath:
    """Single-break regime path: state 0 strictly before the break, 1 after.

    Filtered probabilities are one-hot at the realized state and every
    transition-matrix row points at the state realized in that period, so
    filtering and backward sampling reproduce the path exactly.
    """
    quarters = tuple(
        Quarter.parse(d) if isinstance(d, str) else d for d in dates
    )
    if not quarters:
        raise ValidationError("dates must be non-empty")
    for prev, nxt in zip(quarters, quarters[1:]):
        if nxt.index <= prev.index:
            raise ValidationError("dates must be strictly increasing")
    brk = Quarter.parse(break_date) if isinstance(break_date, str) else break_date
    if brk < quarters[0] or brk > quarters[-1]:
        raise ValidationError(
            f"break date {brk} outside the sample {quarters[0]}..{quarters[-1]}"
        )
    states = np.array([1 if d >= brk else 0 for d in quarters], dtype=np.int64)
    t_len = states.size
    filtered = np.zeros((t_len, 2))
    filtered[np.arange(t_len), states] = 1.0
    trans = np.zeros((t_len, 2, 2))
    trans[np.arange(t_len), 0, states] = 1.0
    trans[np.arange(t_len), 1, states] = 1.0
    return RegimePath(
        states=states, filtered_prob=filtered, transition_matrices=trans
    )
