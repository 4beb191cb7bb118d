"""Static vector-graphics rendering of estimation output.

Every function writes an SVG file and returns its path. Output bytes are
deterministic for identical inputs: the Agg backend does the rendering,
element ids are salted with a fixed string instead of the process clock,
and the creation-date metadata is stripped.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import ValidationError
from .irf import IrfResult, PeakSummary

_RC = {
    "svg.hashsalt": "msfavar",
    "svg.fonttype": "none",
    "font.size": 9.0,
    "axes.titlesize": 9.5,
    "figure.dpi": 100,
}

_REGIME_COLORS = ("#1f5fa8", "#c23b22", "#3a8c5c", "#8358a5")


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _regime_label(r: int, n_regimes: int) -> str:
    return f"regime {r}" if n_regimes > 1 else "posterior"


def irf_grid_figure(result: IrfResult, shock, path: str | Path,
                    max_cols: int = 4) -> Path:
    """Median response and 68% band per variable, regimes overlaid.

    One panel per responding variable, horizon on the x axis, a zero
    reference line in each panel.
    """
    variables = list(result.variables)
    if isinstance(shock, str):
        if shock not in variables:
            raise ValidationError(f"no variable named {shock!r}")
        shock = variables.index(shock)
    shock = int(shock)
    if not 0 <= shock < len(variables):
        raise ValidationError(f"shock index {shock} out of range")

    k = len(variables)
    n_regimes = result.n_regimes
    ncols = min(max_cols, k)
    nrows = (k + ncols - 1) // ncols
    horizons = np.arange(result.horizon + 1)

    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            nrows, ncols, figsize=(2.9 * ncols, 2.2 * nrows),
            sharex=True, squeeze=False)
        for j, name in enumerate(variables):
            ax = axes[j // ncols][j % ncols]
            ax.axhline(0.0, color="0.55", lw=0.7)
            for r in range(n_regimes):
                color = _REGIME_COLORS[r % len(_REGIME_COLORS)]
                ax.fill_between(
                    horizons,
                    result.band_low[r, shock, j],
                    result.band_high[r, shock, j],
                    color=color, alpha=0.22, lw=0)
                ax.plot(horizons, result.median[r, shock, j],
                        color=color, lw=1.3,
                        label=_regime_label(r, n_regimes))
            ax.set_title(name)
        for j in range(k, nrows * ncols):
            axes[j // ncols][j % ncols].set_axis_off()
        for ax in axes[-1]:
            ax.set_xlabel("quarters")
        handles, labels = axes[0][0].get_legend_handles_labels()
        fig.legend(handles, labels, loc="lower right", frameon=False)
        fig.suptitle(f"responses to a {variables[shock]} shock", y=0.995)
        fig.tight_layout(rect=(0, 0, 1, 0.97))
        return _save(fig, path)


def regime_path_figure(dates, prob_high, path: str | Path,
                       rate=None, rate_label: str = "short rate") -> Path:
    """Posterior probability of the second regime over the sample.

    ``dates`` labels the x axis (one entry per effective period); an
    optional ``rate`` series is overlaid on a secondary axis.
    """
    prob = np.asarray(prob_high, dtype=float)
    if prob.ndim != 1:
        raise ValidationError("probability path must be a vector")
    if len(dates) != prob.shape[0]:
        raise ValidationError(
            f"{len(dates)} dates for {prob.shape[0]} probabilities")
    labels = [str(d) for d in dates]
    idx = np.arange(prob.shape[0])

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8.2, 3.0))
        ax.fill_between(idx, 0.0, prob, color="#c23b22", alpha=0.35, lw=0)
        ax.plot(idx, prob, color="#c23b22", lw=1.4,
                label="P(regime 1)")
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("posterior probability")
        step = max(1, len(idx) // 10)
        ax.set_xticks(idx[::step])
        ax.set_xticklabels(labels[::step], rotation=45, ha="right")
        if rate is not None:
            rate = np.asarray(rate, dtype=float)
            if rate.shape != prob.shape:
                raise ValidationError("rate series must match the path length")
            ax2 = ax.twinx()
            ax2.plot(idx, rate, color="#1f5fa8", lw=1.1, label=rate_label)
            ax2.set_ylabel(rate_label)
            lines = ax.get_lines() + ax2.get_lines()
            ax.legend(lines, [ln.get_label() for ln in lines],
                      loc="upper right", frameon=False)
        else:
            ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def peak_heatmap_figure(summary: PeakSummary, path: str | Path) -> Path:
    """Signed peak responses as a colored table, one row per variable.

    Cell color encodes the signed peak, the annotation gives the value
    and its quarter, and cells whose band covers zero at the peak are
    left blank.
    """
    n_regimes = len(summary.entries)
    variables = list(summary.variables)
    k = len(variables)

    values = np.zeros((k, n_regimes))
    mask = np.zeros((k, n_regimes), dtype=bool)
    notes = [["" for _ in range(n_regimes)] for _ in range(k)]
    for r in range(n_regimes):
        for j in range(k):
            entry = summary.entries[r][j]
            if entry.significant:
                values[j, r] = entry.peak_value
                notes[j][r] = f"{entry.peak_value:.2f}\nq{entry.peak_quarter}"
            else:
                mask[j, r] = True
    scale = np.abs(values).max()
    if scale == 0.0:
        scale = 1.0

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(1.6 * n_regimes + 2.6, 0.42 * k + 1.6))
        shown = np.ma.masked_array(values, mask=mask)
        cmap = plt.get_cmap("RdBu_r").copy()
        cmap.set_bad(color="white")
        im = ax.imshow(shown, cmap=cmap, vmin=-scale, vmax=scale,
                       aspect="auto")
        ax.set_xticks(range(n_regimes))
        ax.set_xticklabels(
            [_regime_label(r, n_regimes) for r in range(n_regimes)])
        ax.set_yticks(range(k))
        ax.set_yticklabels(variables)
        for j in range(k):
            for r in range(n_regimes):
                if notes[j][r]:
                    dark = abs(values[j, r]) > 0.62 * scale
                    ax.text(r, j, notes[j][r], ha="center", va="center",
                            fontsize=7.5, color="white" if dark else "black")
        ax.set_title(f"peak responses to a {summary.shock_name} shock")
        fig.colorbar(im, ax=ax, shrink=0.85)
        fig.tight_layout()
        return _save(fig, path)
