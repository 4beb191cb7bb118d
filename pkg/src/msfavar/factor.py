"""Principal-component factor extraction and conditional regime loadings.

Factors are extracted once from the standardized external panel and then
treated as observed by the VAR stage; regime-specific loadings are estimated
conditionally afterwards and do not feed back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InsufficientDataError, PriorConfig, RankError, ValidationError


@dataclass
class FactorSet:
    """Extracted factors with loadings and explained-variance shares.

    factors: T x q, unit sample variance per column, sign-anchored to the
    cross-sectional mean of the panel. loadings: S x q regression loadings of
    each input series on the factors. explained_variance_share: q shares of
    total panel variance, descending.
    """

    factors: np.ndarray
    loadings: np.ndarray
    explained_variance_share: np.ndarray

    def __post_init__(self):
        self.factors = np.asarray(self.factors, dtype=float)
        self.loadings = np.asarray(self.loadings, dtype=float)
        self.explained_variance_share = np.asarray(self.explained_variance_share,
                                                   dtype=float)


def extract_principal_components(panel: np.ndarray, q: int) -> FactorSet:
    """Leading q principal components of a standardized T x S panel.

    Eigendecomposition runs on the S x S covariance when S <= T and on the
    T x T Gram matrix otherwise; both routes give identical factors. Columns
    must already be standardized (sample sd 1 within 1e-6). Each factor is
    scaled to unit sample variance and signed to correlate positively with
    the cross-sectional mean series.
    """
    X = np.asarray(panel, dtype=float)
    if X.ndim != 2:
        raise ValidationError("panel must be 2-D (T x S)")
    T, S = X.shape
    if T < 3:
        raise InsufficientDataError("need at least 3 periods for factor extraction")
    if not (1 <= q <= min(T, S)):
        raise ValidationError(f"q={q} outside 1..min(T, S)={min(T, S)}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("panel contains undefined entries")
    sds = np.std(X, axis=0, ddof=1)
    off = np.where(np.abs(sds - 1.0) > 1e-6)[0]
    if off.size:
        raise ValidationError(
            f"column {int(off[0])} is not standardized (sd={sds[off[0]]:.6g})")

    Xc = X - X.mean(axis=0)
    total_var = S  # trace of the correlation-scale covariance
    if S <= T:
        C = (Xc.T @ Xc) / (T - 1)
        eigvals, eigvecs = np.linalg.eigh(C)
        order = np.argsort(eigvals)[::-1]
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        rank = int(np.sum(eigvals > 1e-10 * max(eigvals[0], 1.0)))
        if q > rank:
            raise RankError(f"q={q} exceeds panel rank {rank}")
        raw = Xc @ eigvecs[:, :q]
    else:
        G = (Xc @ Xc.T) / (T - 1)
        gvals, gvecs = np.linalg.eigh(G)
        order = np.argsort(gvals)[::-1]
        gvals = gvals[order]
        gvecs = gvecs[:, order]
        rank = int(np.sum(gvals > 1e-10 * max(gvals[0], 1.0)))
        if q > rank:
            raise RankError(f"q={q} exceeds panel rank {rank}")
        eigvals = gvals
        # Gram eigenvectors are the factor paths up to scale
        raw = gvecs[:, :q] * np.sqrt(np.maximum(gvals[:q], 0.0)) * np.sqrt(T - 1)

    lam = eigvals[:q]
    factors = raw / np.std(raw, axis=0, ddof=1)
    anchor = Xc.mean(axis=1)
    for j in range(q):
        c = float(factors[:, j] @ anchor)
        if c < 0:
            factors[:, j] = -factors[:, j]
    loadings = (Xc.T @ factors) / (T - 1)
    share = lam / total_var
    return FactorSet(factors=factors, loadings=loadings,
                     explained_variance_share=share)


@dataclass
class RegimeLoadings:
    """Per-regime loadings and measurement-error variances.

    loadings: n_regimes x S x q with the first q rows pinned to the identity
    block. data_backed flags whether a regime had enough periods; when False
    that regime's entries are the prior means.
    """

    loadings: np.ndarray
    meas_error_vars: np.ndarray
    data_backed: tuple[bool, ...]

    def __post_init__(self):
        q = self.loadings.shape[2]
        for r in range(self.loadings.shape[0]):
            if not np.array_equal(self.loadings[r, :q, :], np.eye(q)):
                raise ValidationError("loadings must carry an identity top block")


def regime_loadings(panel: np.ndarray, factors: np.ndarray, states: np.ndarray,
                    prior: PriorConfig, stream: np.random.Generator,
                    n_regimes: int = 2, strict: bool = False,
                    n_draws: int = 300, n_burn: int = 100) -> RegimeLoadings:
    """Posterior-mean loadings of each series on the factors, per regime.

    Per series and regime, a short Gibbs run alternates the Gaussian loading
    conditional (prior N(0, loading_prior_variance I)) with the inverse-gamma
    error-variance conditional. Rows 1..q are overwritten with the identity
    block regardless of data. A regime with fewer than q + 2 assigned periods
    falls back to the prior mean (flagged), or raises when strict.
    """
    Z = np.asarray(panel, dtype=float)
    F = np.asarray(factors, dtype=float)
    states = np.asarray(states)
    if Z.ndim != 2 or F.ndim != 2 or Z.shape[0] != F.shape[0]:
        raise ValidationError("panel and factors must share the time dimension")
    if states.shape[0] != Z.shape[0]:
        raise ValidationError("states must align with the panel")
    T, S = Z.shape
    q = F.shape[1]
    a0 = prior.meas_error_ig_shape
    b0 = prior.meas_error_ig_scale
    v0 = prior.loading_prior_variance
    prior_var_mean = b0 / (a0 - 1.0) if a0 > 1.0 else b0

    loadings = np.zeros((n_regimes, S, q))
    meas = np.full((n_regimes, S), prior_var_mean)
    backed = []
    for r in range(n_regimes):
        rows = np.where(states == r)[0]
        if rows.size < q + 2:
            if strict:
                raise InsufficientDataError(
                    f"regime {r} has {rows.size} periods, need >= {q + 2}")
            backed.append(False)
        else:
            backed.append(True)
            Fr = F[rows]
            FtF = Fr.T @ Fr
            for j in range(S):
                y = Z[rows, j]
                Fty = Fr.T @ y
                lam = np.linalg.solve(FtF + np.eye(q) / v0, Fty)
                sig2 = prior_var_mean
                lam_acc = np.zeros(q)
                sig_acc = 0.0
                for it in range(n_draws + n_burn):
                    prec = FtF / sig2 + np.eye(q) / v0
                    L = np.linalg.cholesky(prec)
                    mean = np.linalg.solve(prec, Fty / sig2)
                    lam = mean + np.linalg.solve(L.T, stream.standard_normal(q))
                    resid = y - Fr @ lam
                    sig2 = 1.0 / stream.gamma(a0 + rows.size / 2.0,
                                              1.0 / (b0 + 0.5 * resid @ resid))
                    if it >= n_burn:
                        lam_acc += lam
                        sig_acc += sig2
                loadings[r, j] = lam_acc / n_draws
                meas[r, j] = sig_acc / n_draws
        loadings[r, :q, :] = np.eye(q)
        meas[r, :q] = 0.0
    return RegimeLoadings(loadings=loadings, meas_error_vars=meas,
                          data_backed=tuple(backed))
