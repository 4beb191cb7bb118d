"""Series transformations used to build estimation-ready panels.

All functions operate on 1-D float arrays and either return new arrays or
raise a typed error; nothing mutates its input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (DegenerateSeriesError, DomainError, InsufficientDataError,
                   UnsupportedGapError, ValidationError)

RECIPE_NAMES = ("log_qoq_diff", "level", "four_quarter_moving_sum_over_gdp",
                "standardize_only")


@dataclass(frozen=True)
class TransformRecipe:
    """Per-series instruction: which transform to apply before standardization.

    ``aux`` names the companion series needed by the moving-sum recipe (the
    nominal GDP denominator).
    """

    series: str
    recipe: str
    aux: str | None = None

    def __post_init__(self):
        if self.recipe not in RECIPE_NAMES:
            raise ValidationError(f"unknown recipe {self.recipe!r} for {self.series!r}")
        if self.recipe == "four_quarter_moving_sum_over_gdp" and self.aux is None:
            raise ValidationError(f"recipe for {self.series!r} needs an aux gdp series")


def log_qoq_diff(x: np.ndarray) -> np.ndarray:
    """100 times the first difference of log(x); output length T - 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InsufficientDataError("log_qoq_diff needs a 1-D series of length >= 2")
    bad = np.where(~(x > 0))[0]
    if bad.size:
        raise DomainError(f"non-positive value at index {int(bad[0])}: {x[bad[0]]!r}")
    return 100.0 * np.diff(np.log(x))


def moving_sum_4_over_gdp(flows: np.ndarray, gdp: np.ndarray) -> np.ndarray:
    """100 * (4-quarter moving sum of flows) / (4-quarter moving sum of gdp).

    The first three entries are undefined (NaN) and are trimmed by the caller.
    """
    flows = np.asarray(flows, dtype=float)
    gdp = np.asarray(gdp, dtype=float)
    if flows.shape != gdp.shape or flows.ndim != 1:
        raise ValidationError("flows and gdp must be 1-D arrays of equal length")
    if flows.size < 4:
        raise InsufficientDataError("need at least 4 quarters for the moving sum")
    bad = np.where(~(gdp > 0))[0]
    if bad.size:
        raise DomainError(f"non-positive gdp at index {int(bad[0])}: {gdp[bad[0]]!r}")
    out = np.full(flows.size, np.nan)
    kernel = np.ones(4)
    fsum = np.convolve(flows, kernel, mode="valid")
    gsum = np.convolve(gdp, kernel, mode="valid")
    out[3:] = 100.0 * fsum / gsum
    return out


def standardize(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Demean and scale to unit sample standard deviation (n - 1 divisor).

    Returns (standardized, mean, sd) so the mapping can be inverted.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InsufficientDataError("standardize needs a 1-D series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise ValidationError("standardize requires a fully defined series")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd <= 1e-12 * max(1.0, abs(mean)):
        raise DegenerateSeriesError("zero sample variance")
    return (x - mean) / sd, mean, sd


def fill_edge_gaps(x: np.ndarray) -> np.ndarray:
    """Fill leading/trailing NaN runs with the mean of the four nearest defined values.

    Every leading gap entry gets the mean of the first four defined values;
    every trailing gap entry the mean of the last four. Interior gaps are not
    supported and raise UnsupportedGapError.
    """
    x = np.asarray(x, dtype=float).copy()
    if x.ndim != 1:
        raise ValidationError("fill_edge_gaps expects a 1-D series")
    defined = np.isfinite(x)
    if defined.all():
        return x
    idx = np.where(defined)[0]
    if idx.size == 0:
        raise InsufficientDataError("series has no defined values")
    first, last = int(idx[0]), int(idx[-1])
    if not defined[first:last + 1].all():
        inner = first + int(np.where(~defined[first:last + 1])[0][0])
        raise UnsupportedGapError(f"interior gap at index {inner}")
    if first > 0:
        if idx.size < 4:
            raise InsufficientDataError("fewer than 4 defined values after a leading gap")
        x[:first] = np.mean(x[first:first + 4])
    if last < x.size - 1:
        if idx.size < 4:
            raise InsufficientDataError("fewer than 4 defined values before a trailing gap")
        x[last + 1:] = np.mean(x[last - 3:last + 1])
    return x
