"""Autoregression with stochastic volatility, estimated by Gibbs sampling.

The observation equation regresses a standardized series on its own lags
with no intercept; the log error variance follows a stationary AR(1).
Volatility states are sampled with the ten-component Gaussian mixture
approximation to the log chi-squared(1) distribution of Omori, Chib,
Shephard and Nakajima (2007), combined with a banded-precision draw of
the whole log-variance path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded
from scipy.stats import geninvgauss

from .core import (
    InsufficientDataError,
    NumericalError,
    PriorConfig,
    ValidationError,
)
from .transform import standardize

# Mixture approximation to log chi2(1): component probabilities, means and
# variances from Omori et al. (2007), Table 1.
OCSN_PROBS = np.array(
    [
        0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
        0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
    ]
)
OCSN_MEANS = np.array(
    [
        1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
        -1.97278, -3.46788, -5.55246, -8.68384, -14.65000,
    ]
)
OCSN_VARS = np.array(
    [
        0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
        0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
    ]
)

LOG_OFFSET = 1e-3
DIVERGENCE_BOUND = 50.0


@dataclass(frozen=True)
class SvParams:
    """Posterior summaries of the volatility model.

    ``logvar_path`` is aligned to the input series: the first ``r`` periods
    lost to lagging are backfilled with the first defined value.
    """

    rho: np.ndarray
    mu: float
    phi: float
    sigma2_v: float
    logvar_path: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        path = np.asarray(self.logvar_path, dtype=float)
        if rho.ndim != 1 or not np.all(np.isfinite(rho)):
            raise ValidationError("rho must be a finite vector")
        if path.ndim != 1 or not np.all(np.isfinite(path)):
            raise ValidationError("logvar_path must be a finite vector")
        mu = float(self.mu)
        phi = float(self.phi)
        sigma2 = float(self.sigma2_v)
        if not np.isfinite(mu):
            raise ValidationError("mu must be finite")
        if not (abs(phi) < 1.0):
            raise ValidationError("phi must lie strictly inside (-1, 1)")
        if not (np.isfinite(sigma2) and sigma2 > 0.0):
            raise ValidationError("sigma2_v must be positive")
        rho.flags.writeable = False
        path.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "logvar_path", path)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma2_v", sigma2)


def ar_design(series: np.ndarray, r: int):
    """Lag matrix and target for a pure AR(r): column m-1 holds lag m."""
    t_len = series.size
    rows = t_len - r
    design = np.empty((rows, r))
    for m in range(1, r + 1):
        design[:, m - 1] = series[r - m : t_len - m]
    return design, series[r:]


def draw_mixture_indicators(ystar, logvar, stream) -> np.ndarray:
    """Component labels for each period given the current log-variance path."""
    centered = ystar - logvar
    log_w = (
        np.log(OCSN_PROBS)[None, :]
        - 0.5 * np.log(2.0 * np.pi * OCSN_VARS)[None, :]
        - 0.5 * (centered[:, None] - OCSN_MEANS[None, :]) ** 2 / OCSN_VARS[None, :]
    )
    log_w -= log_w.max(axis=1, keepdims=True)
    weights = np.exp(log_w)
    weights /= weights.sum(axis=1, keepdims=True)
    cumulative = np.cumsum(weights, axis=1)
    uniforms = stream.random(ystar.size)
    return (cumulative < uniforms[:, None]).sum(axis=1)


def draw_logvar_path(ystar, indicators, mu, phi, sigma2, stream) -> np.ndarray:
    """One draw of the full log-variance path.

    The AR(1) prior (stationary initial condition) plus the mixture
    observation terms give a tridiagonal posterior precision; the draw uses
    a banded Cholesky factor, so cost is linear in the sample length.
    """
    n = ystar.size
    obs_prec = 1.0 / OCSN_VARS[indicators]
    obs = ystar - OCSN_MEANS[indicators] - mu
    diag = np.full(n, (1.0 + phi * phi) / sigma2)
    diag[0] = 1.0 / sigma2
    diag[-1] = 1.0 / sigma2
    diag += obs_prec
    banded = np.zeros((2, n))
    banded[0, 1:] = -phi / sigma2
    banded[1, :] = diag
    factor = cholesky_banded(banded, lower=False)
    mean = cho_solve_banded((factor, False), obs_prec * obs)
    deviate = solve_banded((0, 1), factor, stream.standard_normal(n))
    return mu + mean + deviate


def draw_ar_coeffs(design, target, logvar, prior_variance, stream) -> np.ndarray:
    """Gaussian draw of the AR coefficients under heteroskedastic weights."""
    weights = np.exp(-logvar)
    weighted = design * weights[:, None]
    precision = np.eye(design.shape[1]) / prior_variance + design.T @ weighted
    factor = np.linalg.cholesky(precision)
    mean = np.linalg.solve(precision, weighted.T @ target)
    shock = np.linalg.solve(factor.T, stream.standard_normal(design.shape[1]))
    return mean + shock


def update_mu(logvar, phi, sigma2, prior_variance, stream) -> float:
    """Conjugate draw of the log-variance level, stationary term included."""
    n = logvar.size
    precision = (
        1.0 / prior_variance
        + (1.0 - phi * phi) / sigma2
        + (n - 1) * (1.0 - phi) ** 2 / sigma2
    )
    weighted_sum = (1.0 - phi * phi) * logvar[0] / sigma2
    weighted_sum += (1.0 - phi) * np.sum(logvar[1:] - phi * logvar[:-1]) / sigma2
    return weighted_sum / precision + stream.standard_normal() / np.sqrt(precision)


def update_phi(logvar, mu, sigma2, beta_a, beta_b, current, stream) -> float:
    """Independence Metropolis step for the persistence parameter.

    The proposal is the Gaussian conditional implied by the transition
    terms alone; the acceptance ratio then carries the stationary initial
    condition and the Beta prior on (phi + 1) / 2.
    """
    h = logvar - mu
    den = h[:-1] @ h[:-1]
    if den <= 0.0:
        return current
    prop_mean = (h[1:] @ h[:-1]) / den
    prop_sd = np.sqrt(sigma2 / den)
    candidate = prop_mean + prop_sd * stream.standard_normal()
    if abs(candidate) >= 1.0:
        return current

    def log_extra(p):
        return (
            0.5 * np.log1p(-p * p)
            - (1.0 - p * p) * h[0] ** 2 / (2.0 * sigma2)
            + (beta_a - 1.0) * np.log1p(p)
            + (beta_b - 1.0) * np.log1p(-p)
        )

    if np.log(stream.random()) < log_extra(candidate) - log_extra(current):
        return candidate
    return current


def update_sigma2(logvar, mu, phi, shape, rate, stream) -> float:
    """Exact draw of the innovation variance.

    A Gamma prior on sigma2 itself combines with the Gaussian likelihood
    into a generalized-inverse-Gaussian conditional.
    """
    h = logvar - mu
    ssr = (1.0 - phi * phi) * h[0] ** 2 + np.sum((h[1:] - phi * h[:-1]) ** 2)
    ssr = max(ssr, 1e-12)
    order = shape - h.size / 2.0
    return np.sqrt(ssr / (2.0 * rate)) * geninvgauss.rvs(
        order, np.sqrt(2.0 * rate * ssr), random_state=stream
    )


def estimate_ar_sv(series, r, priors: PriorConfig, n_draws, n_burn, stream):
    """Gibbs estimation of the AR(r) model with stochastic volatility.

    Each sweep draws (i) the AR coefficients by weighted regression, (ii)
    mixture indicators and the log-variance path, (iii) the level,
    persistence and innovation variance of the path.  Returns the
    posterior-mean ``SvParams`` plus a dict of per-draw arrays; the stored
    ``logvar`` draws are aligned to the input with the first r periods
    backfilled.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValidationError("series must be a vector")
    if not np.all(np.isfinite(values)):
        raise ValidationError("series contains non-finite values")
    r = int(r)
    if r < 1:
        raise ValidationError("autoregressive order must be at least 1")
    if values.size < r + 20:
        raise InsufficientDataError(
            f"need at least {r + 20} observations for order {r}, got {values.size}"
        )
    n_draws = int(n_draws)
    n_burn = int(n_burn)
    if n_draws < 1 or n_burn < 0:
        raise ValidationError("n_draws must be positive and n_burn non-negative")

    design, target = ar_design(values, r)
    n_eff = target.size

    rho, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ rho
    base_logvar = float(np.clip(np.log(max(resid.var(), 1e-8)), -40.0, 40.0))
    logvar = np.full(n_eff, base_logvar)
    mu = base_logvar
    phi = priors.phi_prior_mean()
    sigma2 = 0.05

    keep = {
        "rho": np.empty((n_draws, r)),
        "mu": np.empty(n_draws),
        "phi": np.empty(n_draws),
        "sigma2_v": np.empty(n_draws),
        "logvar": np.empty((n_draws, values.size)),
    }
    for sweep in range(n_burn + n_draws):
        rho = draw_ar_coeffs(design, target, logvar, priors.sv_rho_variance, stream)
        resid = target - design @ rho
        ystar = np.log(resid * resid + LOG_OFFSET)
        indicators = draw_mixture_indicators(ystar, logvar, stream)
        logvar = draw_logvar_path(ystar, indicators, mu, phi, sigma2, stream)
        if np.max(np.abs(logvar)) > DIVERGENCE_BOUND:
            raise NumericalError(
                "log-variance path diverged (|v| > 50); "
                "re-standardize the input series before estimation"
            )
        mu = update_mu(logvar, phi, sigma2, priors.sv_mu_variance, stream)
        phi = update_phi(
            logvar, mu, sigma2, priors.sv_phi_beta_a, priors.sv_phi_beta_b, phi, stream
        )
        sigma2 = update_sigma2(
            logvar, mu, phi, priors.sv_sigma_shape, priors.sv_sigma_rate, stream
        )
        draw = sweep - n_burn
        if draw >= 0:
            keep["rho"][draw] = rho
            keep["mu"][draw] = mu
            keep["phi"][draw] = phi
            keep["sigma2_v"][draw] = sigma2
            keep["logvar"][draw, :r] = logvar[0]
            keep["logvar"][draw, r:] = logvar

    params = SvParams(
        rho=keep["rho"].mean(axis=0),
        mu=float(keep["mu"].mean()),
        phi=float(keep["phi"].mean()),
        sigma2_v=float(keep["sigma2_v"].mean()),
        logvar_path=keep["logvar"].mean(axis=0),
    )
    return params, keep


def volatility_proxy(series, spec, stream, n_draws=2000, n_burn=1000) -> np.ndarray:
    """Standardized posterior-mean log-variance path of a series.

    Runs the volatility sampler at the order set in ``spec.sv_ar_order``
    and returns the full-length path (early periods backfilled) after
    standardization, ready to enter the model as a column.
    """
    values = np.asarray(series, dtype=float)
    standardize(values)  # rejects constant input before any sampling
    params, _ = estimate_ar_sv(
        values, spec.sv_ar_order, spec.prior, n_draws, n_burn, stream
    )
    proxy, _, _ = standardize(params.logvar_path)
    return proxy


def rolling_std_proxy(series, window: int = 8) -> np.ndarray:
    """Model-free alternative: standardized log rolling standard deviation.

    Trailing window of ``window`` quarters; the first window-1 entries are
    backfilled with the first defined value.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValidationError("series must be a vector")
    if values.size < window + 1:
        raise InsufficientDataError(
            f"need more than {window} observations, got {values.size}"
        )
    if window < 2:
        raise ValidationError("window must be at least 2")
    t_len = values.size
    path = np.empty(t_len)
    for t in range(window - 1, t_len):
        path[t] = np.log(max(values[t - window + 1 : t + 1].std(ddof=1), 1e-12))
    path[: window - 1] = path[window - 1]
    proxy, _, _ = standardize(path)
    return proxy
