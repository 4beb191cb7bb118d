"""Gibbs sampler for the two-regime vector autoregression.

Coefficients are pooled across regimes through a common Gaussian center
with inverse-gamma element variances; regime covariances share a Wishart
scale matrix that itself carries a Wishart hyperprior.  Regime paths come
from the Hamilton filter with probit-driven transition probabilities, or
from a fixed calendar break, or are absent (single-regime mode).

Wishart convention used throughout: a draw W(shape a, scale A) has density
proportional to |X|^(a-(K+1)/2) exp(-tr(inv(A) X)) and mean a*A.  It is
proper whenever a > (K-1)/2, which permits the fractional shapes used
here.  This is the standard Wishart with 2a degrees of freedom and scale
A/2; sampling goes through the Bartlett decomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .core import (
    DrawStore,
    ModelSpec,
    NumericalError,
    PACKAGE_VERSION,
    PriorConfig,
    ValidationError,
    spec_hash,
)
from .regime import (
    ProbitParams,
    hamilton_filter,
    sample_states_ffbs,
    stationary_distribution,
    transition_matrix_path,
    update_probit,
)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PoolingState:
    """Common coefficient center and per-element pooling variances."""

    beta_pool_mean: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.beta_pool_mean, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if mean.ndim != 1 or xi.shape != mean.shape:
            raise ValidationError("pooling mean and xi must be equal-length vectors")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(xi)):
            raise ValidationError("pooling state must be finite")
        if np.any(xi <= 0.0):
            raise ValidationError("xi entries must be strictly positive")
        mean.flags.writeable = False
        xi.flags.writeable = False
        object.__setattr__(self, "beta_pool_mean", mean)
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class WishartHyper:
    """Hyperparameters of the covariance hierarchy.

    ``s_matrix`` is tied to the per-variable OLS variances by
    s_matrix = 100 * (s_scalar / psi_scalar) * diag(sigma_hat).
    """

    psi_scalar: float
    s_scalar: float
    s_matrix: np.ndarray
    sigma_hat: np.ndarray

    def __post_init__(self):
        sigma_hat = np.asarray(self.sigma_hat, dtype=float)
        s_matrix = np.asarray(self.s_matrix, dtype=float)
        psi = float(self.psi_scalar)
        s = float(self.s_scalar)
        if sigma_hat.ndim != 1 or np.any(sigma_hat <= 0):
            raise ValidationError("sigma_hat must be a positive vector")
        k = sigma_hat.size
        if s_matrix.shape != (k, k):
            raise ValidationError("s_matrix must be K x K")
        if psi <= (k - 1) / 2 or s <= (k - 1) / 2:
            raise ValidationError(
                "Wishart shapes must exceed (K-1)/2 for a proper prior"
            )
        expected = 100.0 * (s / psi) * np.diag(sigma_hat)
        if not np.allclose(s_matrix, expected, rtol=1e-8, atol=1e-12):
            raise ValidationError(
                "s_matrix must equal 100 * (s/psi) * diag(sigma_hat)"
            )
        sigma_hat.flags.writeable = False
        s_matrix.flags.writeable = False
        object.__setattr__(self, "sigma_hat", sigma_hat)
        object.__setattr__(self, "s_matrix", s_matrix)
        object.__setattr__(self, "psi_scalar", psi)
        object.__setattr__(self, "s_scalar", s)

    @classmethod
    def from_variances(cls, sigma_hat, psi_scalar, s_scalar) -> "WishartHyper":
        sigma_hat = np.asarray(sigma_hat, dtype=float)
        s_matrix = 100.0 * (s_scalar / psi_scalar) * np.diag(sigma_hat)
        return cls(
            psi_scalar=psi_scalar,
            s_scalar=s_scalar,
            s_matrix=s_matrix,
            sigma_hat=sigma_hat,
        )

    @classmethod
    def from_data(cls, x, spec: ModelSpec) -> "WishartHyper":
        """Build the hierarchy from univariate AR residual variances."""
        sigma_hat = ols_ar_variances(x, spec.p_lags)
        return cls.from_variances(
            sigma_hat, spec.prior.wishart_psi, spec.prior.wishart_s
        )


def inv_spd(matrix: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, symmetrized."""
    matrix = np.asarray(matrix, dtype=float)
    try:
        factor = cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"matrix not positive definite (condition number "
            f"{np.linalg.cond(matrix):.3e})"
        ) from exc
    inverse = cho_solve(factor, np.eye(matrix.shape[0]))
    return (inverse + inverse.T) / 2.0


def wishart_draw(shape: float, scale: np.ndarray, stream) -> np.ndarray:
    """One Wishart draw with mean shape*scale, via Bartlett decomposition."""
    scale = np.asarray(scale, dtype=float)
    k = scale.shape[0]
    if shape <= (k - 1) / 2:
        raise ValidationError(f"shape {shape} too small for dimension {k}")
    try:
        root = np.linalg.cholesky(scale / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"Wishart scale not positive definite (condition number "
            f"{np.linalg.cond(scale):.3e})"
        ) from exc
    bartlett = np.zeros((k, k))
    dof = 2.0 * shape - np.arange(k)
    bartlett[np.diag_indices(k)] = np.sqrt(stream.chisquare(dof))
    if k > 1:
        normals = stream.standard_normal((k, k))
        lower = np.tril_indices(k, -1)
        bartlett[lower] = normals[lower]
    mixed = root @ bartlett
    return mixed @ mixed.T


def ols_ar_variances(x, lag_order: int) -> np.ndarray:
    """Residual variance of a univariate AR fit, per column.

    Each column is regressed on an intercept and its own ``lag_order``
    lags.  A singular design or an essentially perfect fit falls back to
    the sample variance (floored away from zero) with a warning.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError("x must be a T x K matrix")
    t_len, n_cols = x.shape
    lag_order = int(lag_order)
    if lag_order < 1:
        raise ValidationError("lag order must be at least 1")
    if t_len <= lag_order + 2:
        raise ValidationError(
            f"need more than {lag_order + 2} observations, got {t_len}"
        )
    out = np.empty(n_cols)
    rows = t_len - lag_order
    for j in range(n_cols):
        col = x[:, j]
        design = np.empty((rows, lag_order + 1))
        design[:, 0] = 1.0
        for m in range(1, lag_order + 1):
            design[:, m] = col[lag_order - m : t_len - m]
        target = col[lag_order:]
        coeffs, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        sample_var = col.var(ddof=1)
        if rank < lag_order + 1:
            warnings.warn(
                f"singular AR design for column {j}; using sample variance",
                RuntimeWarning,
            )
            out[j] = max(sample_var, 1e-8)
            continue
        resid = target - design @ coeffs
        dof = rows - lag_order - 1
        resid_var = resid @ resid / max(dof, 1)
        if resid_var <= 1e-12 * max(sample_var, 1e-12):
            warnings.warn(
                f"near-perfect AR fit for column {j}; using sample variance",
                RuntimeWarning,
            )
            out[j] = max(sample_var, 1e-8)
        else:
            out[j] = resid_var
    return out


def build_design(x, p_lags: int):
    """Stacked VAR regression pieces: targets x[P:], rows [1, x_{t-1}..x_{t-P}].

    The column order matches the row-major coefficient layout in which each
    equation's row reads (intercept, lag-1 coefficients, ..., lag-P
    coefficients).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError("x must be a T x K matrix")
    t_len, k = x.shape
    p = int(p_lags)
    if p < 1 or t_len <= p:
        raise ValidationError("need at least p_lags + 1 observations")
    rows = t_len - p
    design = np.empty((rows, k * p + 1))
    design[:, 0] = 1.0
    for lag in range(1, p + 1):
        design[:, 1 + (lag - 1) * k : 1 + lag * k] = x[p - lag : t_len - lag]
    return x[p:], design


def var_coeffs_posterior(targets, design, omega, pool_mean, xi):
    """Gaussian conditional of one regime's vectorized coefficients.

    Generalized least squares with known covariance plus the pooled prior;
    the posterior precision is inv(Xi) + kron(inv(omega), X'X) under the
    row-major coefficient layout.  Returns the mean and the lower Cholesky
    factor of the precision.  With no observations this reduces exactly to
    the pooled prior, so the same algebra serves empty regimes.
    """
    k = pool_mean.size // design.shape[1]
    omega_inv = inv_spd(omega)
    gram = design.T @ design
    precision = np.kron(omega_inv, gram)
    diag = np.diag_indices(pool_mean.size)
    precision[diag] += 1.0 / xi
    rhs = pool_mean / xi + (omega_inv @ (targets.T @ design)).ravel()
    try:
        factor = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"posterior precision not positive definite (condition number "
            f"{np.linalg.cond(precision):.3e})"
        ) from exc
    return cho_solve((factor, True), rhs), factor


def draw_var_coeffs(targets, design, omega, pool_mean, xi, stream) -> np.ndarray:
    """One draw from the coefficient conditional of ``var_coeffs_posterior``."""
    mean, factor = var_coeffs_posterior(targets, design, omega, pool_mean, xi)
    shock = solve_triangular(
        factor.T, stream.standard_normal(mean.size), lower=False
    )
    return mean + shock


def sample_regime_var_coeffs(x, states, omega_pair, pooling: PoolingState, stream):
    """Coefficient draws for both regimes given the state allocation.

    The lag order is implied by the gap between the panel length and the
    state-path length.  A regime with no assigned periods gets, through
    the same conditional, exactly a draw from the pooled prior.
    """
    x = np.asarray(x, dtype=float)
    states = np.asarray(states)
    t_len, k = x.shape
    p = t_len - states.size
    if p < 1:
        raise ValidationError("state path must be shorter than the panel")
    targets, design = build_design(x, p)
    draws = []
    for s, omega in enumerate(omega_pair):
        rows = states == s
        draws.append(
            draw_var_coeffs(
                targets[rows],
                design[rows],
                omega,
                pooling.beta_pool_mean,
                pooling.xi,
                stream,
            )
        )
    return tuple(draws)


def sample_pooling(
    beta_regime0,
    beta_regime1,
    hyperpriors: PriorConfig,
    stream,
    current: PoolingState | None = None,
) -> PoolingState:
    """Draw the pooled center and element variances.

    The center is Gaussian with precision (prior precision + R/xi per
    element) around the precision-weighted average of zero and the regime
    coefficients; each xi is inverse-gamma with shape a + R/2 and rate
    b + half the squared deviations.  ``beta_regime1`` may be None in
    single-regime mode.
    """
    beta0 = np.asarray(beta_regime0, dtype=float)
    betas = [beta0]
    if beta_regime1 is not None:
        beta1 = np.asarray(beta_regime1, dtype=float)
        if beta1.shape != beta0.shape:
            raise ValidationError("regime coefficient vectors must match in shape")
        betas.append(beta1)
    n_regimes = len(betas)
    size = beta0.size
    a_xi = hyperpriors.xi_shape
    b_xi = hyperpriors.xi_rate
    if current is None:
        xi = np.full(size, b_xi / max(a_xi - 1.0, 0.5))
    else:
        xi = current.xi
    precision = 1.0 / hyperpriors.pooling_mean_variance + n_regimes / xi
    mean = (sum(betas) / xi) / precision
    pool_mean = mean + stream.standard_normal(size) / np.sqrt(precision)
    shape = a_xi + n_regimes / 2.0
    rate = b_xi + 0.5 * sum((b - pool_mean) ** 2 for b in betas)
    xi_new = 1.0 / stream.gamma(shape, 1.0 / rate)
    return PoolingState(beta_pool_mean=pool_mean, xi=xi_new)


def sample_regime_covariances(
    residuals_by_regime, psi_matrix, hyper: WishartHyper, stream
):
    """Covariance draws for each regime.

    The precision of regime s is Wishart with shape psi + T_s/2 and scale
    inv(inv(Psi) + E_s/2), where E_s stacks the residual outer products;
    with no observations this is exactly the prior W(psi, Psi).  Returns
    the covariances (inverted draws).
    """
    psi_matrix = np.asarray(psi_matrix, dtype=float)
    psi_inv = inv_spd(psi_matrix)
    out = []
    for resid in residuals_by_regime:
        resid = np.asarray(resid, dtype=float).reshape(-1, psi_matrix.shape[0])
        shape = hyper.psi_scalar + 0.5 * resid.shape[0]
        rate = psi_inv + 0.5 * resid.T @ resid
        precision = wishart_draw(shape, inv_spd(rate), stream)
        out.append(inv_spd(precision))
    return tuple(out)


def sample_psi(omega_inverses, hyper: WishartHyper, stream) -> np.ndarray:
    """Draw the shared Wishart scale given the regime precisions.

    The hierarchy places the Wishart law on inv(Psi), centered so that its
    prior mean is s_matrix; combining it with the regime precisions is an
    exact conjugate update, and the returned matrix is Psi itself.
    """
    omega_inverses = [np.asarray(m, dtype=float) for m in omega_inverses]
    prior_scale = hyper.s_matrix / hyper.s_scalar
    rate = inv_spd(prior_scale)
    for om_inv in omega_inverses:
        rate = rate + om_inv
    shape = hyper.s_scalar + hyper.psi_scalar * len(omega_inverses)
    theta = wishart_draw(shape, inv_spd(rate), stream)
    return inv_spd(theta)


def regime_log_likelihoods(targets, design, beta_pair, omega_pair) -> np.ndarray:
    """Per-period Gaussian log density under each regime's parameters."""
    targets = np.asarray(targets, dtype=float)
    rows, k = targets.shape
    out = np.empty((rows, len(beta_pair)))
    for s, (beta, omega) in enumerate(zip(beta_pair, omega_pair)):
        coeff = np.asarray(beta, dtype=float).reshape(k, -1)
        resid = targets - design @ coeff.T
        try:
            root = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"regime {s} covariance not positive definite"
            ) from exc
        white = solve_triangular(root, resid.T, lower=True)
        quad = np.einsum("ij,ij->j", white, white)
        logdet = 2.0 * np.sum(np.log(np.diag(root)))
        out[:, s] = -0.5 * (k * _LOG_2PI + logdet + quad)
    return out


def regime_likelihoods(x, beta_pair, omega_pair) -> np.ndarray:
    """Density version of ``regime_log_likelihoods`` for a full panel.

    The lag order is implied by the coefficient length.  Intended for
    small problems; the sampler itself works with the log version plus
    row-max rescaling to avoid underflow.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[1]
    n_coeffs = np.asarray(beta_pair[0]).size
    p, rem = divmod(n_coeffs // k - 1, k)
    if rem or n_coeffs != k * (k * p + 1):
        raise ValidationError("coefficient length inconsistent with panel width")
    if x.shape[0] <= p:
        raise ValidationError("need more observations than lags")
    targets, design = build_design(x, p) if p >= 1 else (x, np.ones((x.shape[0], 1)))
    return np.exp(regime_log_likelihoods(targets, design, beta_pair, omega_pair))


def batch_means_mcse(draws, n_batches: int = 20) -> float:
    """Monte Carlo standard error of a chain mean by batch means."""
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size < 2 * n_batches:
        raise ValidationError("too few draws for the requested batch count")
    usable = draws.size - draws.size % n_batches
    batches = draws[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


@dataclass
class GibbsState:
    """Mutable chain state carried between sweeps."""

    beta: tuple
    omega: tuple
    pooling: PoolingState
    psi: np.ndarray
    probit: ProbitParams | None
    states: np.ndarray
    filtered: np.ndarray
    loglik: float


@dataclass(frozen=True)
class _RunContext:
    x: np.ndarray
    targets: np.ndarray
    design: np.ndarray
    rates_lagged: np.ndarray
    rates_contemp: np.ndarray
    spec: ModelSpec
    hyper: WishartHyper
    fixed_states: np.ndarray | None
    fixed_filtered: np.ndarray | None


def _one_hot(states: np.ndarray) -> np.ndarray:
    out = np.zeros((states.size, 2))
    out[np.arange(states.size), states] = 1.0
    return out


def _initial_state(ctx: _RunContext) -> GibbsState:
    spec = ctx.spec
    coeffs, *_ = np.linalg.lstsq(ctx.design, ctx.targets, rcond=None)
    beta_init = np.ascontiguousarray(coeffs.T).ravel()
    resid = ctx.targets - ctx.design @ coeffs
    rows = max(resid.shape[0] - 1, 1)
    omega_init = resid.T @ resid / rows + 1e-6 * np.eye(spec.n_vars)
    prior = spec.prior
    xi_init = np.full(
        beta_init.size, prior.xi_rate / max(prior.xi_shape - 1.0, 0.5)
    )
    pooling = PoolingState(beta_pool_mean=beta_init, xi=xi_init)
    psi_init = inv_spd(ctx.hyper.s_matrix)
    if spec.regime_mode == "endogenous_markov":
        # the two labelings are mirror modes of the posterior, so the
        # starting partition decides which one a finite chain reports;
        # start from the one matching the labeling convention in force
        median = np.median(ctx.rates_contemp)
        if spec.label_rule == "high_rate_zero":
            states = (ctx.rates_contemp < median).astype(np.int64)
        else:
            states = (ctx.rates_contemp > median).astype(np.int64)
        probit = ProbitParams(c0=(0.0, 0.0), gamma=0.0)
    elif spec.regime_mode == "deterministic_break":
        states = ctx.fixed_states.copy()
        probit = None
    else:
        states = np.zeros(ctx.targets.shape[0], dtype=np.int64)
        probit = None
    # seed the regime coefficients from split fits on the starting
    # partition; the first sweep's state draw then respects it, which is
    # what actually selects the labeling
    beta_list, omega_list = [], []
    min_rows = ctx.design.shape[1] + 2
    for s in range(spec.n_regimes):
        mask = states == s
        if int(mask.sum()) >= min_rows:
            c_s, *_ = np.linalg.lstsq(ctx.design[mask], ctx.targets[mask], rcond=None)
            r_s = ctx.targets[mask] - ctx.design[mask] @ c_s
            beta_list.append(np.ascontiguousarray(c_s.T).ravel())
            omega_list.append(
                r_s.T @ r_s / max(int(mask.sum()) - 1, 1)
                + 1e-6 * np.eye(spec.n_vars)
            )
        else:
            beta_list.append(beta_init.copy())
            omega_list.append(omega_init.copy())
    return GibbsState(
        beta=tuple(beta_list),
        omega=tuple(omega_list),
        pooling=pooling,
        psi=psi_init,
        probit=probit,
        states=states,
        filtered=_one_hot(states) if spec.n_regimes == 2 else np.ones((states.size, 1)),
        loglik=-np.inf,
    )


def _gibbs_sweep(state: GibbsState, ctx: _RunContext, stream) -> GibbsState:
    spec = ctx.spec
    mode = spec.regime_mode
    n_regimes = spec.n_regimes
    log_lik = regime_log_likelihoods(ctx.targets, ctx.design, state.beta, state.omega)

    if mode == "endogenous_markov":
        row_max = log_lik.max(axis=1)
        scaled = np.exp(log_lik - row_max[:, None])
        trans = transition_matrix_path(state.probit, ctx.rates_lagged)
        filtered, filter_ll = hamilton_filter(
            scaled, trans, stationary_distribution(trans[0])
        )
        loglik = filter_ll + row_max.sum()
        states = sample_states_ffbs(filtered, trans, stream)
        probit = update_probit(
            states,
            ctx.rates_contemp,
            spec.prior.probit_coef_variance,
            stream,
            current=state.probit,
            n_iter=3,
        )
    elif mode == "deterministic_break":
        states = state.states
        filtered = state.filtered
        probit = None
        loglik = float(log_lik[np.arange(states.size), states].sum())
    else:
        states = state.states
        filtered = state.filtered
        probit = None
        loglik = float(log_lik[:, 0].sum())

    beta = sample_regime_var_coeffs(
        ctx.x, states, state.omega[:n_regimes], state.pooling, stream
    )
    pooling = sample_pooling(
        beta[0],
        beta[1] if n_regimes == 2 else None,
        spec.prior,
        stream,
        current=state.pooling,
    )
    k = spec.n_vars
    residuals = []
    for s in range(n_regimes):
        mask = states == s
        coeff = beta[s].reshape(k, -1)
        residuals.append(ctx.targets[mask] - ctx.design[mask] @ coeff.T)
    omegas = sample_regime_covariances(residuals, state.psi, ctx.hyper, stream)
    psi = sample_psi([inv_spd(om) for om in omegas], ctx.hyper, stream)

    if (
        mode == "endogenous_markov"
        and spec.label_rule == "high_rate_zero"
        and 0 < states.sum() < states.size
    ):
        rate_zero = ctx.rates_contemp[states == 0].mean()
        rate_one = ctx.rates_contemp[states == 1].mean()
        if rate_zero < rate_one:
            beta = (beta[1], beta[0])
            omegas = (omegas[1], omegas[0])
            states = 1 - states
            filtered = filtered[:, ::-1]
            probit = ProbitParams(
                c0=(-probit.c0[1], -probit.c0[0]), gamma=-probit.gamma
            )

    return GibbsState(
        beta=beta,
        omega=omegas,
        pooling=pooling,
        psi=psi,
        probit=probit,
        states=states,
        filtered=filtered,
        loglik=loglik,
    )


def run_gibbs(
    panel_x, interest_rate, spec: ModelSpec, stream, hyper=None
) -> DrawStore:
    """Full posterior simulation; returns the retained draws.

    ``panel_x`` is the assembled T x K matrix (factor block first, then the
    endogenous series in identification order) or a panel object carrying
    one; ``interest_rate`` is the T-vector driving the transition probit
    and the regime labeling.  The first ``p_lags`` observations condition
    the likelihood.  Sweeps run regime likelihoods, state sampling, probit,
    coefficients, pooling, covariances, the shared scale, and the label
    rule, in that order; single-regime mode drops the state, probit and
    label steps.  ``hyper`` overrides the covariance hyperparameters that
    are otherwise calibrated from the data.
    """
    x = np.asarray(getattr(panel_x, "values", panel_x), dtype=float)
    if x.ndim != 2:
        raise ValidationError("panel_x must be a T x K matrix")
    t_len, k = x.shape
    if k != spec.n_vars:
        raise ValidationError(
            f"panel has {k} columns but the model expects {spec.n_vars}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("panel contains non-finite values")
    rates = np.asarray(interest_rate, dtype=float)
    if rates.shape != (t_len,):
        raise ValidationError("interest_rate must align with the panel rows")
    if not np.all(np.isfinite(rates)):
        raise ValidationError("interest rates must be finite")
    p = spec.p_lags
    t_eff = t_len - p
    min_eff = 10 if spec.regime_mode == "endogenous_markov" else 2
    if t_eff < min_eff:
        raise ValidationError(
            f"need at least {p + min_eff} observations for this mode, got {t_len}"
        )

    targets, design = build_design(x, p)
    fixed_states = fixed_filtered = None
    if spec.regime_mode == "deterministic_break":
        dates = getattr(panel_x, "dates", None)
        if dates is None:
            raise ValidationError("deterministic-break mode needs a dated panel")
        from .regime import deterministic_states

        full_path = deterministic_states(dates, spec.break_date)
        fixed_states = full_path.states[p:].copy()
        fixed_filtered = full_path.filtered_prob[p:].copy()

    ctx = _RunContext(
        x=x,
        targets=targets,
        design=design,
        rates_lagged=rates[p - 1 : t_len - 1],
        rates_contemp=rates[p:],
        spec=spec,
        hyper=hyper if hyper is not None else WishartHyper.from_data(x, spec),
        fixed_states=fixed_states,
        fixed_filtered=fixed_filtered,
    )
    state = _initial_state(ctx)
    if fixed_filtered is not None:
        state.filtered = fixed_filtered

    n_regimes = spec.n_regimes
    n_draws, n_burn = spec.n_draws, spec.n_burn
    n_coeffs = spec.n_coeffs
    keep = {
        "beta": np.empty((n_draws, n_regimes, n_coeffs)),
        "omega": np.empty((n_draws, n_regimes, k, k)),
        "pool_mean": np.empty((n_draws, n_coeffs)),
        "xi": np.empty((n_draws, n_coeffs)),
        "psi": np.empty((n_draws, k, k)),
        "states": np.empty((n_draws, t_eff), dtype=np.int8),
        "loglik": np.empty(n_draws),
    }
    if spec.regime_mode == "endogenous_markov":
        keep["probit_c0"] = np.empty((n_draws, 2))
        keep["probit_gamma"] = np.empty(n_draws)
    filtered_sum = np.zeros((t_eff, 2))

    for sweep in range(n_burn + n_draws):
        try:
            state = _gibbs_sweep(state, ctx, stream)
        except Exception as exc:
            failure = NumericalError(f"sweep {sweep} failed: {exc}")
            failure.sweep = sweep
            failure.last_good = state
            raise failure from exc
        draw = sweep - n_burn
        if draw < 0:
            continue
        keep["beta"][draw] = np.stack(state.beta)
        keep["omega"][draw] = np.stack(state.omega)
        keep["pool_mean"][draw] = state.pooling.beta_pool_mean
        keep["xi"][draw] = state.pooling.xi
        keep["psi"][draw] = state.psi
        keep["states"][draw] = state.states
        keep["loglik"][draw] = state.loglik
        if spec.regime_mode == "endogenous_markov":
            keep["probit_c0"][draw] = state.probit.c0
            keep["probit_gamma"][draw] = state.probit.gamma
        if n_regimes == 2:
            filtered_sum += state.filtered
        else:
            filtered_sum[:, 0] += 1.0
    keep["filtered_prob_mean"] = filtered_sum / n_draws

    meta = {
        "n_draws": n_draws,
        "n_burn": n_burn,
        "n_regimes": n_regimes,
        "n_vars": k,
        "p_lags": p,
        "t_obs": t_len,
        "t_eff": t_eff,
        "regime_mode": spec.regime_mode,
        "label_rule": spec.label_rule,
        "spec_hash": spec_hash(spec),
        "package_version": PACKAGE_VERSION,
        "layout": {
            "beta": "draw x regime x coefficient (row-major equation blocks)",
            "omega": "draw x regime x K x K",
            "pool_mean": "draw x coefficient",
            "xi": "draw x coefficient",
            "psi": "draw x K x K",
            "states": "draw x effective period",
            "loglik": "draw",
            "filtered_prob_mean": "effective period x 2 (posterior mean)",
        },
    }
    return DrawStore(arrays=keep, meta=meta)
