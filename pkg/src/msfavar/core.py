"""Shared value types, configuration, seeded random streams, and posterior storage.

Everything downstream (transforms, factor extraction, samplers, IRFs, CLI) builds on
the types defined here. Value objects are treated as immutable once constructed.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

PACKAGE_VERSION = "0.1.0"

REGIME_MODES = ("linear", "endogenous_markov", "deterministic_break")
LABEL_RULES = ("high_rate_zero", "none")


class MsfavarError(Exception):
    """Base class for all package errors."""


class ValidationError(MsfavarError):
    """Configuration or model-spec validation failure."""


class DomainError(MsfavarError):
    """Input outside an operation's mathematical domain (e.g. log of a non-positive)."""


class InsufficientDataError(MsfavarError):
    """Too few observations to carry out the requested operation."""


class DegenerateSeriesError(MsfavarError):
    """A series with zero sample variance where variation is required."""


class UnsupportedGapError(MsfavarError):
    """Interior missing values, which the gap-filling rule does not cover."""


class NumericalError(MsfavarError):
    """Numerical failure (non-positive-definite system, divergent path, ...)."""


class DegenerateLikelihoodError(MsfavarError):
    """All regime likelihoods vanished at some period."""


class RankError(MsfavarError):
    """Requested more components than the data's rank supports."""


# ---------------------------------------------------------------------------
# quarterly dates

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


@dataclass(frozen=True, order=True)
class Quarter:
    """A calendar quarter, ordered, formatted as YYYYQn."""

    year: int
    quarter: int

    def __post_init__(self):
        if not 1 <= self.quarter <= 4:
            raise ValidationError(f"quarter must be 1..4, got {self.quarter}")

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        m = _QUARTER_RE.match(text.strip())
        if m is None:
            raise ValidationError(f"bad quarter literal {text!r}, expected YYYYQn")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"

    @property
    def index(self) -> int:
        """Quarters since 0000Q1; differences give quarter counts."""
        return self.year * 4 + (self.quarter - 1)

    @classmethod
    def from_index(cls, idx: int) -> "Quarter":
        return cls(idx // 4, idx % 4 + 1)

    def shift(self, n: int) -> "Quarter":
        return Quarter.from_index(self.index + n)


def quarter_range(start, end) -> tuple[Quarter, ...]:
    """Inclusive run of consecutive quarters from start to end."""
    if isinstance(start, str):
        start = Quarter.parse(start)
    if isinstance(end, str):
        end = Quarter.parse(end)
    if end.index < start.index:
        raise ValidationError(f"end {end} precedes start {start}")
    return tuple(Quarter.from_index(i) for i in range(start.index, end.index + 1))


# ---------------------------------------------------------------------------
# panels


@dataclass
class TimeSeriesPanel:
    """Named quarterly series in a T x n array.

    Dates must be consecutive quarters. Values are float64; NaN entries are
    only allowed when ``allow_missing`` is set (raw data before gap filling).
    """

    series_names: tuple[str, ...]
    dates: tuple[Quarter, ...]
    values: np.ndarray
    country_code: str = ""
    allow_missing: bool = False

    def __post_init__(self):
        self.series_names = tuple(str(s) for s in self.series_names)
        self.dates = tuple(self.dates)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("panel values must be 2-D (T x n)")
        T, n = self.values.shape
        if len(self.dates) != T:
            raise ValidationError(f"{len(self.dates)} dates for {T} rows")
        if len(self.series_names) != n:
            raise ValidationError(f"{len(self.series_names)} names for {n} columns")
        if len(set(self.series_names)) != n:
            raise ValidationError("duplicate series names")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur.index != prev.index + 1:
                raise ValidationError(f"dates not consecutive at {prev} -> {cur}")
        if not self.allow_missing and not np.all(np.isfinite(self.values)):
            raise ValidationError("panel contains undefined entries")
        self.values.setflags(write=False)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.series_names.index(name)
        except ValueError:
            raise ValidationError(f"no series named {name!r}") from None
        return self.values[:, j]

    def window(self, start: Quarter, end: Quarter) -> "TimeSeriesPanel":
        i0 = start.index - self.dates[0].index
        i1 = end.index - self.dates[0].index
        if i0 < 0 or i1 >= self.n_periods:
            raise ValidationError(f"window {start}..{end} outside panel range")
        return TimeSeriesPanel(self.series_names, self.dates[i0:i1 + 1],
                               self.values[i0:i1 + 1].copy(), self.country_code,
                               self.allow_missing)


def load_panel_csv(path: str | Path, country_code: str = "",
                   allow_missing: bool = True) -> TimeSeriesPanel:
    """Read a comma-separated panel: header of names, first column YYYYQn dates.

    Empty cells become NaN (allowed only with ``allow_missing``).
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise ValidationError(f"{path}: parse error at line 0: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) < 2:
        raise ValidationError(f"{path}: parse error at line 1: need a date column plus data")
    names = header[1:]
    dates, rows = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise ValidationError(
                f"{path}: parse error at line {lineno}: {len(cells)} cells, expected {len(header)}")
        try:
            dates.append(Quarter.parse(cells[0]))
        except ValidationError as exc:
            raise ValidationError(f"{path}: parse error at line {lineno}: {exc}") from None
        row = []
        for cell in cells[1:]:
            if cell == "":
                row.append(np.nan)
            else:
                try:
                    row.append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"{path}: parse error at line {lineno}: bad number {cell!r}") from None
        rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: parse error at line 1: no data rows")
    return TimeSeriesPanel(tuple(names), tuple(dates), np.array(rows, dtype=float),
                           country_code=country_code, allow_missing=allow_missing)


def save_panel_csv(panel: TimeSeriesPanel, path: str | Path) -> None:
    """Write a panel with full-precision floats (round-trips exactly)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("date," + ",".join(panel.series_names) + "\n")
        for t, date in enumerate(panel.dates):
            cells = []
            for v in panel.values[t]:
                cells.append("" if not np.isfinite(v) else format(v, ".17g"))
            fh.write(str(date) + "," + ",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# priors and model specification


def default_wishart_shape(K: int) -> float:
    """Inner Wishart shape for a K-variable system: 2.5 + (K - 1) / 2."""
    return 2.5 + (K - 1) / 2.0


def default_wishart_hyper_shape(K: int) -> float:
    """Hyperprior shape: 0.5 + (K - 1) / 2."""
    return 0.5 + (K - 1) / 2.0


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters for every prior block in the model.

    wishart_psi / wishart_s are dimension-dependent; use :meth:`for_dimension`
    to fill them from K unless overriding explicitly.
    """

    wishart_psi: float
    wishart_s: float
    pooling_mean_variance: float = 10.0
    xi_shape: float = 3.0
    xi_rate: float = 0.3
    loading_prior_variance: float = 1.0
    meas_error_ig_shape: float = 3.0
    meas_error_ig_scale: float = 0.5
    sv_mu_variance: float = 10.0
    sv_sigma_shape: float = 0.5
    sv_sigma_rate: float = 0.5
    sv_phi_beta_a: float = 25.0
    sv_phi_beta_b: float = 5.0
    sv_rho_variance: float = 10.0
    probit_coef_variance: float = 10.0

    def __post_init__(self):
        for name in ("wishart_psi", "wishart_s", "pooling_mean_variance", "xi_shape",
                     "xi_rate", "loading_prior_variance", "meas_error_ig_shape",
                     "meas_error_ig_scale", "sv_mu_variance", "sv_sigma_shape",
                     "sv_sigma_rate", "sv_phi_beta_a", "sv_phi_beta_b",
                     "sv_rho_variance", "probit_coef_variance"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"prior field {name} must be positive, got {v}")

    @classmethod
    def for_dimension(cls, K: int, **overrides: float) -> "PriorConfig":
        vals = dict(overrides)
        vals.setdefault("wishart_psi", default_wishart_shape(K))
        vals.setdefault("wishart_s", default_wishart_hyper_shape(K))
        return cls(**vals)

    def phi_prior_mean(self) -> float:
        """Mean of phi when (phi + 1) / 2 has a Beta(a, b) prior."""
        a, b = self.sv_phi_beta_a, self.sv_phi_beta_b
        return 2.0 * a / (a + b) - 1.0


_MODEL_KEYS = {
    "p_lags", "q_factors", "m_endog", "endogenous", "ordering", "regime_mode",
    "break_date", "sv_ar_order", "horizon", "n_draws", "n_burn", "label_rule",
}
_PRIOR_KEYS = {
    "wishart_psi", "wishart_s", "pooling_mean_variance", "xi_shape", "xi_rate",
    "loading_prior_variance", "meas_error_ig_shape", "meas_error_ig_scale",
    "sv_mu_variance", "sv_sigma_shape", "sv_sigma_rate", "sv_phi_beta_a",
    "sv_phi_beta_b", "sv_rho_variance", "probit_coef_variance",
}


@dataclass(frozen=True)
class ModelSpec:
    """Validated model configuration.

    ordering lists all K variable names, factor block first, and fixes the
    recursive identification order.
    """

    p_lags: int
    q_factors: int
    m_endog: int
    endogenous: tuple[str, ...]
    ordering: tuple[str, ...]
    prior: PriorConfig
    regime_mode: str = "endogenous_markov"
    break_date: Quarter | None = None
    sv_ar_order: int = 5
    horizon: int = 20
    n_draws: int = 10000
    n_burn: int = 5000
    label_rule: str = "high_rate_zero"

    @property
    def n_vars(self) -> int:
        return self.m_endog + self.q_factors

    @property
    def factor_names(self) -> tuple[str, ...]:
        if self.q_factors == 1:
            return ("factor",)
        return tuple(f"factor_{j + 1}" for j in range(self.q_factors))

    @property
    def coeffs_per_equation(self) -> int:
        return self.n_vars * self.p_lags + 1

    @property
    def n_coeffs(self) -> int:
        return self.n_vars * self.coeffs_per_equation

    @property
    def n_regimes(self) -> int:
        return 1 if self.regime_mode == "linear" else 2


def new_model_spec(config_values: Mapping[str, Any]) -> ModelSpec:
    """Build and validate a ModelSpec from a (possibly nested) mapping.

    Accepts {"model": {...}, "prior": {...}} or a flat mapping of model keys
    with an optional "prior" sub-mapping. Unknown keys raise ValidationError
    naming the offender; wishart_psi / wishart_s default to their
    dimension-dependent formulas unless overridden.
    """
    cfg = dict(config_values)
    model_cfg = dict(cfg.pop("model")) if "model" in cfg else {}
    prior_cfg = dict(cfg.pop("prior")) if "prior" in cfg else {}
    for k, v in cfg.items():
        if k in _MODEL_KEYS:
            model_cfg.setdefault(k, v)
        else:
            raise ValidationError(f"unknown configuration key {k!r}")
    for k in model_cfg:
        if k not in _MODEL_KEYS:
            raise ValidationError(f"unknown model configuration key {k!r}")
    for k in prior_cfg:
        if k not in _PRIOR_KEYS:
            raise ValidationError(f"unknown prior configuration key {k!r}")

    def _req(key):
        if key not in model_cfg:
            raise ValidationError(f"missing configuration key {key!r}")
        return model_cfg[key]

    p_lags = int(_req("p_lags"))
    q_factors = int(_req("q_factors"))
    if p_lags < 1:
        raise ValidationError(f"p_lags must be a positive integer, got {p_lags}")
    if q_factors < 1:
        raise ValidationError(f"q_factors must be a positive integer, got {q_factors}")

    endogenous = model_cfg.get("endogenous")
    if endogenous is None:
        m_endog = int(_req("m_endog"))
        endogenous = tuple(f"y_{j + 1}" for j in range(m_endog))
    else:
        if isinstance(endogenous, str):
            endogenous = tuple(s.strip() for s in endogenous.split(",") if s.strip())
        else:
            endogenous = tuple(str(s) for s in endogenous)
        m_endog = int(model_cfg.get("m_endog", len(endogenous)))
        if m_endog != len(endogenous):
            raise ValidationError(
                f"m_endog={m_endog} but {len(endogenous)} endogenous names given")
    if m_endog < 1:
        raise ValidationError("need at least one endogenous variable")

    factor_names = ("factor",) if q_factors == 1 else tuple(
        f"factor_{j + 1}" for j in range(q_factors))
    all_names = factor_names + endogenous

    ordering = model_cfg.get("ordering")
    if ordering is None:
        ordering = all_names
    else:
        if isinstance(ordering, str):
            ordering = tuple(s.strip() for s in ordering.split(",") if s.strip())
        else:
            ordering = tuple(str(s) for s in ordering)
    missing = [n for n in all_names if n not in ordering]
    extra = [n for n in ordering if n not in all_names]
    if missing or extra:
        raise ValidationError(
            f"ordering must be a permutation of the variable names; "
            f"missing={missing}, extra={extra}")
    if len(ordering) != len(all_names):
        raise ValidationError("ordering contains duplicates")
    if tuple(ordering[:q_factors]) != factor_names:
        raise ValidationError(
            f"ordering must start with the factor block {list(factor_names)}, "
            f"got {list(ordering[:q_factors])}")

    regime_mode = str(model_cfg.get("regime_mode", "endogenous_markov"))
    if regime_mode not in REGIME_MODES:
        raise ValidationError(
            f"regime_mode must be one of {REGIME_MODES}, got {regime_mode!r}")
    break_date = model_cfg.get("break_date")
    if isinstance(break_date, str):
        break_date = Quarter.parse(break_date)
    if regime_mode == "deterministic_break" and break_date is None:
        raise ValidationError("deterministic_break mode requires break_date")

    label_rule = str(model_cfg.get("label_rule", "high_rate_zero"))
    if label_rule not in LABEL_RULES:
        raise ValidationError(f"label_rule must be one of {LABEL_RULES}, got {label_rule!r}")

    sv_ar_order = int(model_cfg.get("sv_ar_order", 5))
    horizon = int(model_cfg.get("horizon", 20))
    n_draws = int(model_cfg.get("n_draws", 10000))
    n_burn = int(model_cfg.get("n_burn", 5000))
    for name, v in (("sv_ar_order", sv_ar_order), ("horizon", horizon),
                    ("n_draws", n_draws)):
        if v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {v}")
    if n_burn < 0:
        raise ValidationError(f"n_burn must be non-negative, got {n_burn}")

    K = m_endog + q_factors
    prior_vals = {k: float(v) for k, v in prior_cfg.items()}
    prior = PriorConfig.for_dimension(K, **prior_vals)

    return ModelSpec(
        p_lags=p_lags, q_factors=q_factors, m_endog=m_endog,
        endogenous=endogenous, ordering=tuple(ordering), prior=prior,
        regime_mode=regime_mode, break_date=break_date, sv_ar_order=sv_ar_order,
        horizon=horizon, n_draws=n_draws, n_burn=n_burn, label_rule=label_rule)


def spec_to_dict(spec: ModelSpec) -> dict:
    d = {
        "model": {
            "p_lags": spec.p_lags, "q_factors": spec.q_factors,
            "m_endog": spec.m_endog, "endogenous": list(spec.endogenous),
            "ordering": list(spec.ordering), "regime_mode": spec.regime_mode,
            "break_date": None if spec.break_date is None else str(spec.break_date),
            "sv_ar_order": spec.sv_ar_order, "horizon": spec.horizon,
            "n_draws": spec.n_draws, "n_burn": spec.n_burn,
            "label_rule": spec.label_rule,
        },
        "prior": {k: getattr(spec.prior, k) for k in sorted(_PRIOR_KEYS)},
    }
    return d


def spec_from_dict(d: Mapping[str, Any]) -> ModelSpec:
    d = {"model": dict(d["model"]), "prior": dict(d["prior"])}
    if d["model"].get("break_date") is None:
        d["model"].pop("break_date", None)
    return new_model_spec(d)


def load_config(path: str | Path) -> dict:
    """Parse an INI-style config into nested {"model": ..., "prior": ..., ...}."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ValidationError(f"cannot read config file {path}")
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        out[section] = dict(parser[section])
    return out


def save_config(config: Mapping[str, Mapping[str, Any]], path: str | Path) -> None:
    parser = configparser.ConfigParser()
    for section, values in config.items():
        parser[section] = {}
        for k, v in values.items():
            if v is None:
                continue
            if isinstance(v, (list, tuple)):
                v = ", ".join(str(x) for x in v)
            parser[section][k] = format(v, ".17g") if isinstance(v, float) else str(v)
    with Path(path).open("w") as fh:
        parser.write(fh)


def spec_from_config_file(path: str | Path) -> ModelSpec:
    cfg = load_config(path)
    known = {k: v for k, v in cfg.items() if k in ("model", "prior")}
    return new_model_spec(known)


# ---------------------------------------------------------------------------
# randomness and hashing


def seeded_stream(seed: int) -> np.random.Generator:
    """Deterministic PCG64 stream; same 64-bit seed, same draw sequence."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValidationError(f"seed must fit in 64 bits, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def spec_hash(spec: ModelSpec) -> str:
    return sha256_bytes(canonical_json(spec_to_dict(spec)).encode())


# ---------------------------------------------------------------------------
# posterior draw storage


@dataclass
class DrawStore:
    """Columnar container of retained posterior draws.

    arrays maps block names (beta, omega, ...) to ndarrays whose leading axes
    are documented in meta["layout"]. Saved as one .npy per block plus a JSON
    manifest carrying dimensions, the seed, the model spec, and content digests;
    the on-disk representation round-trips bit-exactly.
    """

    arrays: dict[str, np.ndarray]
    meta: dict

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def __contains__(self, key: str) -> bool:
        return key in self.arrays

    @property
    def n_draws(self) -> int:
        return int(self.meta["n_draws"])

    @property
    def n_regimes(self) -> int:
        return int(self.meta["n_regimes"])

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = {}
        for name in sorted(self.arrays):
            arr = np.ascontiguousarray(self.arrays[name])
            fname = f"{name}.npy"
            np.save(directory / fname, arr)
            entries[name] = {
                "file": fname,
                "sha256": sha256_file(directory / fname),
                "shape": list(arr.shape),
                "dtype": str(arr.dtype),
            }
        manifest = {"meta": self.meta, "arrays": entries}
        (directory / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "DrawStore":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        arrays = {}
        for name, entry in manifest["arrays"].items():
            path = directory / entry["file"]
            if sha256_file(path) != entry["sha256"]:
                raise ValidationError(f"digest mismatch for stored block {name!r}")
            arrays[name] = np.load(path)
        return cls(arrays=arrays, meta=manifest["meta"])
