"""Synthetic data generation and Monte Carlo recovery checks.

The generative laws mirror the estimated model exactly: a two-regime
vector autoregression whose state path follows probit transition
probabilities driven by a lagged interest rate, and autoregressive
series with stochastic log-variance.  A recovery harness re-estimates
simulated panels over replications and tabulates interval coverage,
posterior-mean RMSE, and state-classification accuracy.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .core import (
    ModelSpec,
    MsfavarError,
    PriorConfig,
    Quarter,
    TimeSeriesPanel,
    ValidationError,
    quarter_range,
    seeded_stream,
)
from .irf import companion_matrix
from .mcmc import run_gibbs
from .regime import ProbitParams, stationary_distribution, transition_matrix_path

__all__ = [
    "SvTruth",
    "DgpSpec",
    "RecoveryReport",
    "simulate_msvar",
    "simulate_ar_sv",
    "recovery_report",
    "recovery_model_spec",
    "well_separated_dgp",
    "linear_dgp",
    "synthetic_raw_country",
    "synthetic_external_panel",
]

BURN_IN = 100


@dataclass(frozen=True)
class SvTruth:
    """True parameters of an autoregressive stochastic-volatility law.

    Observations follow y_t = rho'y_(t-1..t-r) + exp(v_t/2) eps_t with
    v_t = mu + phi (v_(t-1) - mu) + sigma_v eta_t.
    """

    rho: tuple[float, ...]
    mu: float
    phi: float
    sigma_v: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValidationError("volatility persistence must satisfy |phi| < 1")
        if self.sigma_v < 0.0:
            raise ValidationError("sigma_v must be nonnegative")


@dataclass(frozen=True)
class DgpSpec:
    """Complete truth for a two-regime switching autoregression.

    beta holds one flat coefficient vector per regime (intercept first,
    then lag blocks, row-major by equation); omega the regime innovation
    covariances.  The interest rate follows a stationary AR(1) whose mean
    shifts from rate_mean_early to rate_mean_late at mid-sample, and the
    state moves into regime 1 with probability Phi(c0[k] + gamma * rate)
    evaluated at the previous period's rate.  Construction rejects truths
    that are explosive in both regimes or whose transition probabilities
    pin the chain into one state over the whole plausible rate range.
    """

    k: int
    p: int
    t_len: int
    beta: np.ndarray
    omega: np.ndarray
    probit_c0: tuple[float, float] = (0.0, 0.0)
    probit_gamma: float = 0.0
    rate_mean_early: float = 2.0
    rate_mean_late: float = 0.0
    rate_ar: float = 0.7
    rate_sd: float = 0.3
    sv_truth: SvTruth | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.p < 1:
            raise ValidationError("need k >= 1 and p >= 1")
        if self.t_len <= self.p:
            raise ValidationError("t_len must exceed the lag order")
        n_coeffs = self.k * (self.k * self.p + 1)
        beta = np.array(self.beta, dtype=float)
        omega = np.array(self.omega, dtype=float)
        if beta.shape != (2, n_coeffs):
            raise ValidationError(
                f"beta must have shape (2, {n_coeffs}), got {beta.shape}")
        if omega.shape != (2, self.k, self.k):
            raise ValidationError(
                f"omega must have shape (2, {self.k}, {self.k}), got {omega.shape}")
        for s in range(2):
            if not np.allclose(omega[s], omega[s].T, rtol=1e-10, atol=1e-12):
                raise ValidationError(f"omega for regime {s} is not symmetric")
            try:
                np.linalg.cholesky(omega[s])
            except np.linalg.LinAlgError:
                raise ValidationError(
                    f"omega for regime {s} is not positive definite") from None
        radii = [
            float(np.abs(np.linalg.eigvals(companion_matrix(beta[s], self.k))).max())
            for s in range(2)
        ]
        if min(radii) >= 1.0:
            raise ValidationError(
                f"both regimes explosive (spectral radii {radii[0]:.3f}, {radii[1]:.3f})")
        if not abs(self.rate_ar) < 1.0:
            raise ValidationError("rate process must be stationary (|rate_ar| < 1)")
        if self.rate_sd < 0.0:
            raise ValidationError("rate_sd must be nonnegative")
        beta.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "probit_c0",
                           (float(self.probit_c0[0]), float(self.probit_c0[1])))
        self._check_reachability()

    def _check_reachability(self):
        sd_stat = self.rate_sd / np.sqrt(1.0 - self.rate_ar ** 2)
        lo = min(self.rate_mean_early, self.rate_mean_late) - 3.0 * sd_stat
        hi = max(self.rate_mean_early, self.rate_mean_late) + 3.0 * sd_stat
        grid = np.linspace(lo, hi, 41)
        to_one_from_0 = ndtr(self.probit_c0[0] + self.probit_gamma * grid)
        to_one_from_1 = ndtr(self.probit_c0[1] + self.probit_gamma * grid)
        eps = 1e-4
        if to_one_from_0.max() < eps or (1.0 - to_one_from_1).max() < eps:
            raise ValidationError(
                "transition probabilities pin the chain into one regime "
                "over the plausible rate range")

    @property
    def n_coeffs(self) -> int:
        return self.k * (self.k * self.p + 1)


def _rate_means(dgp: DgpSpec, total: int, shift_at: int) -> np.ndarray:
    means = np.full(total, dgp.rate_mean_early)
    means[shift_at:] = dgp.rate_mean_late
    return means


def simulate_msvar(dgp: DgpSpec, burn_in: int = BURN_IN):
    """Simulate (panel, interest rates, states) from the switching law.

    The rate runs through the burn-in at its early mean and shifts to the
    late mean halfway through the retained window.  The initial state is
    drawn from the stationary distribution of the first transition
    matrix; afterwards the state entering period t uses the rate at t-1.
    The first burn_in periods are discarded.
    """
    if burn_in < 0:
        raise ValidationError("burn_in must be nonnegative")
    stream = seeded_stream(dgp.seed)
    total = burn_in + dgp.t_len
    shift_at = burn_in + dgp.t_len // 2
    means = _rate_means(dgp, total, shift_at)

    rates = np.empty(total)
    if dgp.rate_sd > 0.0:
        sd_stat = dgp.rate_sd / np.sqrt(1.0 - dgp.rate_ar ** 2)
    else:
        sd_stat = 0.0
    rates[0] = means[0] + sd_stat * stream.standard_normal()
    shocks = dgp.rate_sd * stream.standard_normal(total - 1)
    for t in range(1, total):
        rates[t] = means[t] + dgp.rate_ar * (rates[t - 1] - means[t - 1]) + shocks[t - 1]

    probit = ProbitParams(c0=dgp.probit_c0, gamma=dgp.probit_gamma)
    trans = transition_matrix_path(probit, rates)
    states = np.empty(total, dtype=np.int64)
    states[0] = int(stream.random() < stationary_distribution(trans[0])[1])
    moves = stream.random(total - 1)
    for t in range(1, total):
        states[t] = int(moves[t - 1] < trans[t - 1][states[t - 1], 1])

    k, p = dgp.k, dgp.p
    coeffs = [dgp.beta[s].reshape(k, k * p + 1) for s in range(2)]
    chols = [np.linalg.cholesky(dgp.omega[s]) for s in range(2)]
    noise = stream.standard_normal((total, k))
    x = np.zeros((p + total, k))
    for t in range(total):
        c = coeffs[states[t]]
        acc = c[:, 0] + chols[states[t]] @ noise[t]
        for j in range(p):
            acc = acc + c[:, 1 + j * k:1 + (j + 1) * k] @ x[p + t - 1 - j]
        x[p + t] = acc

    return x[p + burn_in:], rates[burn_in:], states[burn_in:]


def simulate_ar_sv(truth: SvTruth, t_len: int, stream):
    """Simulate an AR series with stochastic volatility.

    Returns (series, log-variance path); the path starts from its
    stationary distribution and pre-sample observations are zero.
    """
    if t_len < 1:
        raise ValidationError("t_len must be positive")
    if truth.sigma_v > 0.0:
        sd_stat = truth.sigma_v / np.sqrt(1.0 - truth.phi ** 2)
    else:
        sd_stat = 0.0
    logvar = np.empty(t_len)
    logvar[0] = truth.mu + sd_stat * stream.standard_normal()
    vol_shocks = truth.sigma_v * stream.standard_normal(t_len - 1)
    for t in range(1, t_len):
        logvar[t] = truth.mu + truth.phi * (logvar[t - 1] - truth.mu) + vol_shocks[t - 1]
    eps = np.exp(logvar / 2.0) * stream.standard_normal(t_len)
    rho = np.asarray(truth.rho, dtype=float)
    r = rho.size
    series = np.zeros(r + t_len)
    for t in range(t_len):
        series[r + t] = eps[t]
        for j in range(r):
            series[r + t] += rho[j] * series[r + t - 1 - j]
    return series[r:], logvar


def recovery_model_spec(dgp: DgpSpec, regime_mode: str, n_draws: int,
                        n_burn: int, label_rule: str = "none",
                        prior: PriorConfig | None = None,
                        break_date: Quarter | None = None,
                        horizon: int = 20) -> ModelSpec:
    """Model configuration matching a DGP's dimensions.

    Variable names are generic; the first column is labeled as the factor
    so downstream ordering checks hold.
    """
    endog = tuple(f"y{j}" for j in range(dgp.k - 1))
    return ModelSpec(
        p_lags=dgp.p,
        q_factors=1,
        m_endog=dgp.k - 1,
        endogenous=endog,
        ordering=("factor",) + endog,
        prior=prior if prior is not None else PriorConfig.for_dimension(dgp.k),
        regime_mode=regime_mode,
        break_date=break_date,
        horizon=horizon,
        n_draws=n_draws,
        n_burn=n_burn,
        label_rule=label_rule,
    )


@dataclass
class RecoveryReport:
    """Tabulated Monte Carlo recovery results.

    table has one row per parameter block with the share of 90% credible
    intervals covering the truth, the RMSE of posterior means, and (for
    the state row) classification accuracy.  Failures list replication
    index and message for estimations that raised; they are excluded
    from the aggregates.
    """

    table: pd.DataFrame
    state_accuracy: np.ndarray
    gamma_means: np.ndarray
    failures: list = field(default_factory=list)
    n_replications: int = 0

    def to_delimited(self) -> str:
        return self.table.to_csv(index=False)

    def summary(self) -> dict:
        blocks = {}
        for row in self.table.itertuples(index=False):
            blocks[row.block] = {
                "n_values": int(row.n_values),
                "coverage_90": None if np.isnan(row.coverage_90) else float(row.coverage_90),
                "rmse": None if np.isnan(row.rmse) else float(row.rmse),
                "accuracy": None if np.isnan(row.accuracy) else float(row.accuracy),
            }
        return {
            "n_replications": self.n_replications,
            "n_failures": len(self.failures),
            "failures": [{"replication": r, "error": msg} for r, msg in self.failures],
            "state_accuracy_mean": (
                float(self.state_accuracy.mean()) if self.state_accuracy.size else None),
            "gamma_means": self.gamma_means.tolist(),
            "share_gamma_mean_positive": (
                float(np.mean(self.gamma_means > 0.0)) if self.gamma_means.size else None),
            "blocks": blocks,
        }


def _replication_result(dgp: DgpSpec, spec: ModelSpec, rep: int):
    rep_dgp = replace(dgp, seed=dgp.seed + rep)
    x, rates, states_true = simulate_msvar(rep_dgp)
    stream = seeded_stream(rep_dgp.seed + 700_001)
    store = run_gibbs(x, rates, spec, stream)
    result = {"store": store, "states_true": states_true}
    return result


def recovery_report(dgp: DgpSpec, spec: ModelSpec, n_replications: int,
                    n_jobs: int = 1) -> RecoveryReport:
    """Simulate, re-estimate, and score n_replications times.

    Replication r simulates with seed dgp.seed + r and estimates with an
    independently derived stream, so reports are reproducible and
    independent of scheduling.  Coverage uses the central 90% interval
    of the retained draws; RMSE is over posterior means, pooled across
    parameters and replications.  Estimation failures are recorded and
    skipped, not raised.
    """
    if n_replications < 1:
        raise ValidationError("need at least one replication")
    if dgp.k != spec.n_vars or dgp.p != spec.p_lags:
        raise ValidationError("model dimensions do not match the DGP")

    def run_one(rep):
        try:
            return rep, _replication_result(dgp, spec, rep), None
        except MsfavarError as exc:
            return rep, None, f"{type(exc).__name__}: {exc}"

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run_one, range(n_replications)))
    else:
        outcomes = [run_one(rep) for rep in range(n_replications)]

    n_reg = spec.n_regimes
    truth_beta = dgp.beta[:n_reg]
    iu = np.triu_indices(dgp.k)
    truth_omega = np.stack([dgp.omega[s][iu] for s in range(n_reg)])
    markov = spec.regime_mode == "endogenous_markov"
    switching = n_reg == 2

    covered = {}
    sq_err = {}
    counts = {}

    def score(block, lo, hi, post_mean, truth):
        hit = (lo <= truth) & (truth <= hi)
        covered[block] = covered.get(block, 0) + int(hit.sum())
        sq_err[block] = sq_err.get(block, 0.0) + float(((post_mean - truth) ** 2).sum())
        counts[block] = counts.get(block, 0) + truth.size

    accuracies = []
    gamma_means = []
    failures = []
    for rep, result, err in outcomes:
        if err is not None:
            failures.append((rep, err))
            continue
        store = result["store"]
        beta = store["beta"]
        omega = store["omega"]
        for s in range(n_reg):
            lo, hi = np.percentile(beta[:, s], [5.0, 95.0], axis=0)
            score(f"beta_r{s}", lo, hi, beta[:, s].mean(axis=0), truth_beta[s])
            om_draws = omega[:, s][:, iu[0], iu[1]]
            lo, hi = np.percentile(om_draws, [5.0, 95.0], axis=0)
            score(f"omega_r{s}", lo, hi, om_draws.mean(axis=0), truth_omega[s])
        if markov:
            g = store["probit_gamma"]
            lo, hi = np.percentile(g, [5.0, 95.0])
            score("probit_gamma", np.asarray([lo]), np.asarray([hi]),
                  np.asarray([g.mean()]), np.asarray([dgp.probit_gamma]))
            gamma_means.append(float(g.mean()))
            c0 = store["probit_c0"]
            lo, hi = np.percentile(c0, [5.0, 95.0], axis=0)
            score("probit_c0", lo, hi, c0.mean(axis=0),
                  np.asarray(dgp.probit_c0))
        if switching:
            mode_path = store["states"].mean(axis=0) > 0.5
            truth_eff = result["states_true"][spec.p_lags:]
            accuracies.append(float(np.mean(mode_path == truth_eff)))

    rows = []
    for block in sorted(counts):
        n_vals = counts[block]
        rows.append({
            "block": block,
            "n_values": n_vals,
            "coverage_90": covered[block] / n_vals,
            "rmse": np.sqrt(sq_err[block] / n_vals),
            "accuracy": np.nan,
        })
    if switching:
        acc = np.asarray(accuracies)
        rows.append({
            "block": "states",
            "n_values": acc.size,
            "coverage_90": np.nan,
            "rmse": np.nan,
            "accuracy": float(acc.mean()) if acc.size else np.nan,
        })
    table = pd.DataFrame(rows, columns=[
        "block", "n_values", "coverage_90", "rmse", "accuracy"])
    return RecoveryReport(
        table=table,
        state_accuracy=np.asarray(accuracies),
        gamma_means=np.asarray(gamma_means),
        failures=failures,
        n_replications=n_replications,
    )


def well_separated_dgp(seed: int = 202, t_len: int = 300) -> DgpSpec:
    """Two-variable DGP whose regimes differ sharply in mean and scale.

    High rates drive the chain into regime 1 (gamma = 3), so the first
    half of the sample, simulated around the high rate mean, sits mostly
    in regime 1 and the second half in regime 0.
    """
    beta = np.array([
        [1.5, 0.4, 0.1, -1.0, 0.0, 0.3],
        [-1.5, -0.3, 0.0, 1.0, 0.2, -0.2],
    ])
    omega = np.array([
        [[0.30, 0.05], [0.05, 0.25]],
        [[1.40, -0.30], [-0.30, 1.10]],
    ])
    return DgpSpec(
        k=2, p=1, t_len=t_len,
        beta=beta, omega=omega,
        probit_c0=(-4.0, -1.0), probit_gamma=3.0,
        rate_mean_early=2.0, rate_mean_late=-1.0,
        rate_ar=0.7, rate_sd=0.3,
        seed=seed,
    )


def linear_dgp(seed: int = 101, t_len: int = 300) -> DgpSpec:
    """Three-variable DGP with identical regimes: a single-regime law."""
    coeffs = np.array([
        [0.3, 0.5, 0.1, 0.0],
        [-0.2, 0.0, 0.3, 0.2],
        [0.1, 0.1, 0.0, 0.4],
    ])
    omega_one = 0.8 * np.array([
        [1.0, 0.3, 0.1],
        [0.3, 1.0, 0.2],
        [0.1, 0.2, 1.0],
    ])
    flat = coeffs.ravel()
    return DgpSpec(
        k=3, p=1, t_len=t_len,
        beta=np.stack([flat, flat]),
        omega=np.stack([omega_one, omega_one]),
        probit_c0=(0.0, 0.0), probit_gamma=0.0,
        rate_mean_early=1.0, rate_mean_late=1.0,
        rate_ar=0.7, rate_sd=0.3,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# raw-level fixtures for the ingestion pipeline


def _random_walk_level(stream, n, drift, vol, base=100.0):
    return base * np.exp(np.cumsum(drift + vol * stream.standard_normal(n)))


def synthetic_raw_country(country: str, seed: int, start="1999Q2",
                          n_quarters: int = 79) -> TimeSeriesPanel:
    """Raw level series for one synthetic country.

    Columns cover the ingestion pipeline's inputs: an already-differenced
    policy index, levels for output, prices, credit and equity, a real
    exchange rate with stochastic log-change volatility, a short-term
    interest rate with a mid-sample level shift, and capital in- and
    outflows alongside the nominal output used as their denominator.
    """
    if n_quarters < 8:
        raise ValidationError("need at least 8 quarters of raw data")
    start = Quarter.parse(start) if isinstance(start, str) else start
    dates = quarter_range(start, start.shift(n_quarters - 1))
    stream = seeded_stream(seed)

    mppi = np.round(stream.standard_normal(n_quarters), 1)
    mppi *= stream.random(n_quarters) < 0.35

    gdp = _random_walk_level(stream, n_quarters, 0.005, 0.010)
    cpi = _random_walk_level(stream, n_quarters, 0.005, 0.004)
    credit = _random_walk_level(stream, n_quarters, 0.008, 0.020)
    equity = _random_walk_level(stream, n_quarters, 0.010, 0.060)

    reer_truth = SvTruth(rho=(0.3,), mu=np.log(4.0), phi=0.9, sigma_v=0.4)
    reer_growth, _ = simulate_ar_sv(reer_truth, n_quarters, stream)
    reer = 100.0 * np.exp(np.cumsum(reer_growth) / 100.0)

    half = n_quarters // 2
    rate_mean = np.where(np.arange(n_quarters) < half, 4.0, 1.0)
    rate = np.empty(n_quarters)
    rate[0] = rate_mean[0] + 0.3 * stream.standard_normal()
    for t in range(1, n_quarters):
        rate[t] = (rate_mean[t] + 0.8 * (rate[t - 1] - rate_mean[t - 1])
                   + 0.25 * stream.standard_normal())

    gdp_nominal = gdp * cpi / 100.0
    flow_truth = SvTruth(rho=(0.5,), mu=np.log(1.5), phi=0.9, sigma_v=0.3)
    ratio_in, _ = simulate_ar_sv(flow_truth, n_quarters, stream)
    ratio_out, _ = simulate_ar_sv(flow_truth, n_quarters, stream)
    flows_in = gdp_nominal * (3.0 + ratio_in) / 400.0
    flows_out = gdp_nominal * (2.5 + ratio_out) / 400.0

    names = ("mppi", "gdp", "cpi", "credit", "short_rate", "equity", "reer",
             "flows_in", "flows_out", "gdp_nominal")
    values = np.column_stack([
        mppi, gdp, cpi, credit, rate, equity, reer,
        flows_in, flows_out, gdp_nominal,
    ])
    return TimeSeriesPanel(series_names=names, dates=dates, values=values,
                           country_code=country)


def synthetic_external_panel(seed: int, start="1999Q2", n_quarters: int = 79,
                             n_series: int = 30) -> TimeSeriesPanel:
    """Cross-country growth-rate panel with one dominant common factor.

    Each column loads on a persistent common component with idiosyncratic
    noise, so the first principal component of the standardized panel
    recovers the factor.  Columns are growth rates, not levels.
    """
    if n_series < 2:
        raise ValidationError("need at least two external series")
    start = Quarter.parse(start) if isinstance(start, str) else start
    dates = quarter_range(start, start.shift(n_quarters - 1))
    stream = seeded_stream(seed)

    common = np.empty(n_quarters)
    common[0] = stream.standard_normal() / np.sqrt(1.0 - 0.8 ** 2)
    for t in range(1, n_quarters):
        common[t] = 0.8 * common[t - 1] + stream.standard_normal()
    loadings = stream.uniform(0.4, 1.0, size=n_series)
    noise = 0.6 * stream.standard_normal((n_quarters, n_series))
    values = common[:, None] * loadings[None, :] + noise

    kinds = ("equity", "credit", "deposit")
    names = tuple(
        f"ext_{kinds[j % 3]}_{j // 3:02d}" for j in range(n_series))
    return TimeSeriesPanel(series_names=names, dates=dates, values=values,
                           country_code="EXT")
