"""Impulse-response analysis for the estimated vector autoregression.

Structural shocks are identified recursively: the impact matrix is the
lower Cholesky factor of the reduced-form innovation covariance, so a
variable responds on impact only to shocks ordered at or before its own
position.  Responses at later horizons come from powers of the companion
matrix.  Posterior draws map to response draws one-to-one; pointwise
16th/50th/84th percentiles give the median path and a 68% credible band.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .core import DrawStore, ModelSpec, NumericalError, ValidationError

__all__ = [
    "IrfResult",
    "PeakEntry",
    "PeakSummary",
    "structural_impact",
    "companion_matrix",
    "compute_irf",
    "summarize_irf",
    "peak_response",
    "summarize_peaks",
    "irf_long_table",
    "peak_table",
]


def structural_impact(omega: np.ndarray, ordering) -> np.ndarray:
    """Lower Cholesky factor of the innovation covariance.

    Column j holds the impact-period response of every variable to a one
    standard deviation structural shock in position j of ``ordering``.
    Variables respond on impact only to shocks ordered at or before
    themselves, so the factor is exactly lower triangular.

    Parameters
    ----------
    omega : (K, K) symmetric positive definite array.
    ordering : sequence of K variable names fixing the recursive order;
        ``omega`` must already be arranged accordingly.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    k = omega.shape[0]
    if len(ordering) != k:
        raise ValidationError(
            f"ordering lists {len(ordering)} variables for a {k}x{k} covariance")
    if not np.allclose(omega, omega.T, rtol=1e-8, atol=1e-10):
        raise ValidationError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def _coeff_matrix(beta: np.ndarray, k: int) -> np.ndarray:
    """Coefficient vector or matrix -> (k, k*p+1) matrix, p inferred."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        if beta.size % k:
            raise ValidationError("coefficient length is not a multiple of K")
        beta = beta.reshape(k, -1)
    if beta.ndim != 2 or beta.shape[0] != k:
        raise ValidationError("coefficients must have one row per variable")
    per_eq = beta.shape[1]
    if per_eq < k + 1 or (per_eq - 1) % k:
        raise ValidationError(
            "columns per equation must be 1 + K*P for some lag order P >= 1")
    return beta


def companion_matrix(beta: np.ndarray, k: int) -> np.ndarray:
    """Stack the lag coefficient blocks into the (K*P, K*P) companion form.

    ``beta`` holds one equation per row: intercept first, then the lag-1
    block through the lag-P block.  The intercept column is dropped.
    """
    coeffs = _coeff_matrix(beta, k)
    p = (coeffs.shape[1] - 1) // k
    comp = np.zeros((k * p, k * p))
    comp[:k] = coeffs[:, 1:]
    if p > 1:
        idx = np.arange(k * (p - 1))
        comp[k + idx, idx] = 1.0
    return comp


def compute_irf(beta: np.ndarray, impact: np.ndarray, horizon: int) -> np.ndarray:
    """Responses of every variable to every structural shock.

    Returns a (K, K, horizon+1) array whose slice at horizon h is the
    top-left K x K block of the h-th companion power times ``impact``:
    element (i, j, h) is the response of variable i, h periods after a
    one standard deviation shock j.  Horizon 0 is the impact period.
    Intercepts do not enter.
    """
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    impact = np.asarray(impact, dtype=float)
    k = impact.shape[0]
    comp = companion_matrix(beta, k)
    out = np.empty((k, k, horizon + 1))
    out[:, :, 0] = impact
    cur = np.eye(comp.shape[0])
    for h in range(1, horizon + 1):
        cur = cur @ comp
        out[:, :, h] = cur[:k, :k] @ impact
    return out


@dataclass(frozen=True)
class IrfResult:
    """Posterior impulse-response summary.

    responses has axes (draw, regime, shock, variable, horizon); the
    pointwise quantile arrays drop the draw axis.  Shocks are one
    posterior standard deviation in size, horizon 0 is the impact period,
    and band_low/band_high delimit the central 68% credible band.
    n_explosive counts, per regime, the draws whose companion spectral
    radius exceeds one; such draws stay in the summary.
    """

    responses: np.ndarray
    median: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    mean: np.ndarray
    variables: tuple[str, ...]
    horizon: int
    n_explosive: tuple[int, ...]
    shock_size: float = 1.0

    @property
    def n_regimes(self) -> int:
        return self.median.shape[0]


def summarize_irf(store: DrawStore, spec: ModelSpec) -> IrfResult:
    """Impulse responses for every retained draw, with pointwise bands.

    Each draw's regime-specific coefficients and covariance produce one
    response array per regime; the 16th/50th/84th pointwise percentiles
    across draws give the median path and the 68% band.  In single-regime
    mode the regime axis has one entry.
    """
    if "beta" not in store or "omega" not in store:
        raise ValidationError("draw store lacks beta or omega blocks")
    n = store.n_draws
    if n < 1:
        raise ValidationError("draw store holds no retained draws")
    n_reg = store.n_regimes
    k = spec.n_vars
    p = spec.p_lags
    hor = spec.horizon
    beta = np.asarray(store["beta"], dtype=float)
    omega = np.asarray(store["omega"], dtype=float)
    if beta.shape != (n, n_reg, spec.n_coeffs):
        raise ValidationError(
            f"beta block has shape {beta.shape}, expected {(n, n_reg, spec.n_coeffs)}")
    if omega.shape != (n, n_reg, k, k):
        raise ValidationError(
            f"omega block has shape {omega.shape}, expected {(n, n_reg, k, k)}")
    try:
        impacts = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("a stored covariance draw is not positive definite") from exc

    responses = np.empty((n, n_reg, k, k, hor + 1))
    n_explosive = []
    for r in range(n_reg):
        comp = np.zeros((n, k * p, k * p))
        comp[:, :k, :] = beta[:, r].reshape(n, k, k * p + 1)[:, :, 1:]
        if p > 1:
            idx = np.arange(k * (p - 1))
            comp[:, k + idx, idx] = 1.0
        radius = np.abs(np.linalg.eigvals(comp)).max(axis=1)
        n_explosive.append(int(np.sum(radius > 1.0)))
        # (draw, variable, shock) per horizon; stored as (shock, variable)
        block = impacts[:, r]
        responses[:, r, :, :, 0] = block.transpose(0, 2, 1)
        cur = np.broadcast_to(np.eye(k * p), comp.shape).copy()
        for h in range(1, hor + 1):
            cur = cur @ comp
            responses[:, r, :, :, h] = (cur[:, :k, :k] @ block).transpose(0, 2, 1)

    low, med, high = np.percentile(responses, [16.0, 50.0, 84.0], axis=0)
    return IrfResult(
        responses=responses,
        median=med,
        band_low=low,
        band_high=high,
        mean=responses.mean(axis=0),
        variables=tuple(spec.ordering),
        horizon=hor,
        n_explosive=tuple(n_explosive),
    )


@dataclass(frozen=True)
class PeakEntry:
    """Peak of one median response path.

    sign is "negative" or "positive" from the median at the peak;
    significant means the 68% band excludes zero at the peak horizon,
    significant_any that it does so at some horizon.  mean_peak_value is
    the analogous peak taken on the pointwise mean path, kept as a
    diagnostic.
    """

    peak_value: float
    peak_quarter: int
    sign: str
    significant: bool
    significant_any: bool
    mean_peak_value: float | None = None


def peak_response(median: np.ndarray, band_low: np.ndarray,
                  band_high: np.ndarray) -> PeakEntry:
    """Largest-magnitude point of a median response path.

    The peak sits at the horizon maximizing |median|, ties going to the
    earliest horizon; quarter 0 is the impact period.  Significance asks
    whether the 68% band excludes zero, at the peak horizon and,
    separately, at any horizon.
    """
    median = np.asarray(median, dtype=float)
    band_low = np.asarray(band_low, dtype=float)
    band_high = np.asarray(band_high, dtype=float)
    if median.ndim != 1 or median.size < 2:
        raise ValidationError("median path needs at least horizons 0 and 1")
    if band_low.shape != median.shape or band_high.shape != median.shape:
        raise ValidationError("bands must match the median path in shape")
    quarter = int(np.argmax(np.abs(median)))
    value = float(median[quarter])
    excludes = (band_low > 0.0) | (band_high < 0.0)
    return PeakEntry(
        peak_value=value,
        peak_quarter=quarter,
        sign="negative" if value < 0.0 else "positive",
        significant=bool(excludes[quarter]),
        significant_any=bool(excludes.any()),
    )


@dataclass(frozen=True)
class PeakSummary:
    """Peak entries for one shock, indexed [regime][variable]."""

    shock: int
    shock_name: str
    variables: tuple[str, ...]
    entries: tuple[tuple[PeakEntry, ...], ...]


def summarize_peaks(result: IrfResult, shock: int | str) -> PeakSummary:
    """Peaks of every variable's median response to one shock, per regime."""
    if isinstance(shock, str):
        try:
            shock_idx = result.variables.index(shock)
        except ValueError:
            raise ValidationError(f"unknown shock variable {shock!r}") from None
    else:
        shock_idx = int(shock)
        if not 0 <= shock_idx < len(result.variables):
            raise ValidationError(f"shock index {shock_idx} out of range")
    rows = []
    for r in range(result.n_regimes):
        entries = []
        for v in range(len(result.variables)):
            entry = peak_response(
                result.median[r, shock_idx, v],
                result.band_low[r, shock_idx, v],
                result.band_high[r, shock_idx, v])
            mean_path = result.mean[r, shock_idx, v]
            mean_peak = float(mean_path[np.argmax(np.abs(mean_path))])
            entries.append(replace(entry, mean_peak_value=mean_peak))
        rows.append(tuple(entries))
    return PeakSummary(
        shock=shock_idx,
        shock_name=result.variables[shock_idx],
        variables=result.variables,
        entries=tuple(rows),
    )


def irf_long_table(result: IrfResult) -> pd.DataFrame:
    """Median and band in long format, one row per response point."""
    names = result.variables
    k = len(names)
    rows = {"regime": [], "shock": [], "variable": [], "horizon": [],
            "p16": [], "p50": [], "p84": []}
    horizons = np.arange(result.horizon + 1)
    for r in range(result.n_regimes):
        for s in range(k):
            for v in range(k):
                rows["regime"].extend([r] * horizons.size)
                rows["shock"].extend([names[s]] * horizons.size)
                rows["variable"].extend([names[v]] * horizons.size)
                rows["horizon"].extend(horizons.tolist())
                rows["p16"].extend(result.band_low[r, s, v].tolist())
                rows["p50"].extend(result.median[r, s, v].tolist())
                rows["p84"].extend(result.band_high[r, s, v].tolist())
    return pd.DataFrame(rows)


def peak_table(summary: PeakSummary) -> pd.DataFrame:
    """Heatmap-ready peak table, one row per (regime, variable)."""
    rows = {"regime": [], "shock": [], "variable": [], "peak_value": [],
            "peak_quarter": [], "sign": [], "significant": [],
            "significant_any": [], "mean_peak_value": []}
    for r, entries in enumerate(summary.entries):
        for name, entry in zip(summary.variables, entries):
            rows["regime"].append(r)
            rows["shock"].append(summary.shock_name)
            rows["variable"].append(name)
            rows["peak_value"].append(entry.peak_value)
            rows["peak_quarter"].append(entry.peak_quarter)
            rows["sign"].append(entry.sign)
            rows["significant"].append(entry.significant)
            rows["significant_any"].append(entry.significant_any)
            rows["mean_peak_value"].append(entry.mean_peak_value)
    return pd.DataFrame(rows)
