"""Batch pipeline driver: raw panels to posterior draws, tables, figures.

Subcommands
-----------
prepare   transform raw country panels, build volatility proxies and the
          cross-country factor, write standardized estimation panels
estimate  run the Gibbs sampler on prepared panels, write draw stores and
          the regime-path export
irf       turn a draw store into long-format response tables, peak
          summaries, and SVG figures
simulate  generate synthetic data, either model-space arrays or raw-style
          country bundles for exercising ``prepare``
recover   run a Monte Carlo recovery study and write its report
report    verify a run directory against its manifest and summarize it

Every command writes ``manifest.json`` in the output directory listing
each input and artifact with a content digest, the effective seed, and
tool versions. Reruns with identical inputs, config, and seed reproduce
every artifact byte for byte (the manifest's timing field is the one
value that moves).

On failure the last stderr line is machine readable JSON, for example
``{"error": "ValidationError", "message": "..."}``, and the exit code is
2 for input or configuration problems, 3 for numerical failures inside
the sampler, 4 for other package errors, 1 for unexpected exceptions.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, figures, sim
from .core import (DegenerateLikelihoodError, DegenerateSeriesError,
                   DomainError, DrawStore, InsufficientDataError, ModelSpec,
                   MsfavarError, NumericalError, Quarter, RankError,
                   TimeSeriesPanel, UnsupportedGapError, ValidationError,
                   load_config, load_panel_csv, new_model_spec,
                   save_panel_csv, seeded_stream, sha256_file, spec_hash)
from .factor import extract_principal_components
from .irf import irf_long_table, peak_table, summarize_irf, summarize_peaks
from .mcmc import run_gibbs
from .sv import volatility_proxy
from .transform import log_qoq_diff, moving_sum_4_over_gdp, standardize

_MODE_NAMES = {"linear": "linear", "markov": "endogenous_markov",
               "break": "deterministic_break"}


def _tool_versions() -> dict:
    import matplotlib
    import scipy

    return {
        "python": sys.version.split()[0],
        "msfavar": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "matplotlib": matplotlib.__version__,
    }


@dataclass
class RunManifest:
    """Record of one command invocation: inputs, outputs, digests.

    Artifact paths are stored relative to the output directory so a run
    directory can be moved without invalidating its manifest.
    """

    command: str
    seed: int
    config: str | None = None
    inputs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    timing_seconds: float = 0.0
    versions: dict = field(default_factory=_tool_versions)

    def add_input(self, path: str | Path) -> None:
        try:
            self.inputs[str(path)] = sha256_file(path)
        except OSError as exc:
            raise ValidationError(f"cannot read input {path}: {exc}") from exc

    def add_artifact(self, out_dir: Path, path: Path) -> None:
        rel = path.relative_to(out_dir).as_posix()
        self.artifacts[rel] = sha256_file(path)

    def add_tree(self, out_dir: Path, directory: Path) -> None:
        for p in sorted(directory.rglob("*")):
            if p.is_file():
                self.add_artifact(out_dir, p)

    def write(self, out_dir: Path) -> Path:
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "timing_seconds": round(self.timing_seconds, 3),
            "versions": self.versions,
        }
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
        return path


# ---------------------------------------------------------------------------
# shared plumbing


def _load_cfg(path: Path | None, command: str, required: bool = True) -> dict:
    if path is None:
        if required:
            raise ValidationError(f"{command} requires --config")
        return {}
    return load_config(path)


def _spec_with_overrides(cfg: dict, args) -> ModelSpec:
    model = dict(cfg.get("model", {}))
    prior = dict(cfg.get("prior", {}))
    if getattr(args, "mode", None) is not None:
        model["regime_mode"] = _MODE_NAMES[args.mode]
    if getattr(args, "break_date", None) is not None:
        model["break_date"] = args.break_date
    if getattr(args, "draws", None) is not None:
        model["n_draws"] = args.draws
    if getattr(args, "burn", None) is not None:
        model["n_burn"] = args.burn
    return new_model_spec({"model": model, "prior": prior})


def _effective_seed(args, cfg: dict, section: str = "dgp") -> int:
    if args.seed is not None:
        return int(args.seed)
    raw = cfg.get(section, {}).get("seed")
    if raw is not None:
        return int(raw)
    return 0


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _country_code(path: Path) -> str:
    stem = path.stem
    for prefix in ("prepared_", "raw_"):
        if stem.startswith(prefix) and len(stem) > len(prefix):
            return stem[len(prefix):]
    return stem


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_frame(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


# ---------------------------------------------------------------------------
# prepare


_LEVEL, _LOG_DIFF, _RATIO = "level", "log_diff", "flow_ratio"
_LOG_DIFF_SV, _RATIO_SV = "log_diff_sv", "flow_ratio_sv"

_LEAD = {_LEVEL: 0, _LOG_DIFF: 1, _LOG_DIFF_SV: 1, _RATIO: 3, _RATIO_SV: 3}


def _prepare_recipe(name: str) -> tuple[tuple[str, ...], str]:
    """Raw columns and construction rule for one prepared series name."""
    if name in ("mppi", "short_rate"):
        return (name,), _LEVEL
    if name == "inflation":
        return ("cpi",), _LOG_DIFF
    if name in ("flows_in", "flows_out"):
        return (name, "gdp_nominal"), _RATIO
    if name.endswith("_vol"):
        base = name[: -len("_vol")]
        if base in ("flows_in", "flows_out"):
            return (base, "gdp_nominal"), _RATIO_SV
        return (base,), _LOG_DIFF_SV
    if name.endswith("_growth"):
        return (name[: -len("_growth")],), _LOG_DIFF
    raise ValidationError(f"no preparation recipe for series {name!r}")


def _prepare_one_country(raw: TimeSeriesPanel, spec: ModelSpec,
                         factor_values: np.ndarray, stream,
                         sv_draws: int, sv_burn: int):
    """Transform one raw panel into the standardized estimation columns.

    Returns the prepared panel plus a scaling table with the mean and
    standard deviation removed from each column.
    """
    names = [n for n in spec.ordering if n not in spec.factor_names]
    recipes = {n: _prepare_recipe(n) for n in names}
    needed = sorted({src for srcs, _ in recipes.values() for src in srcs})
    missing = [c for c in needed if c not in raw.series_names]
    if missing:
        raise ValidationError(
            f"country {raw.country_code or '?'}: missing required "
            f"column(s) {missing} in raw panel")

    lead = max(_LEAD[kind] for _, kind in recipes.values())
    t_out = raw.n_periods - lead
    if t_out < spec.sv_ar_order + 20:
        raise ValidationError(
            f"country {raw.country_code or '?'}: only {t_out} usable "
            f"quarters after transforms")
    dates = raw.dates[lead:]

    def _series(name: str) -> np.ndarray:
        srcs, kind = recipes[name]
        if kind == _LEVEL:
            return raw.column(srcs[0])[lead:].copy()
        if kind in (_LOG_DIFF, _LOG_DIFF_SV):
            try:
                grown = log_qoq_diff(raw.column(srcs[0]))
            except MsfavarError as exc:
                raise type(exc)(f"series {srcs[0]!r}: {exc}") from None
            grown = grown[len(grown) - t_out:]
            if kind == _LOG_DIFF:
                return grown
            return volatility_proxy(grown, spec, stream, sv_draws, sv_burn)
        try:
            ratio = moving_sum_4_over_gdp(raw.column(srcs[0]),
                                          raw.column(srcs[1]))
        except MsfavarError as exc:
            raise type(exc)(f"series {srcs[0]!r}: {exc}") from None
        ratio = ratio[len(ratio) - t_out:]
        if kind == _RATIO:
            return ratio
        return volatility_proxy(ratio, spec, stream, sv_draws, sv_burn)

    columns, scale_rows = [], []
    for name in spec.ordering:
        if name in spec.factor_names:
            j = spec.factor_names.index(name)
            values = factor_values[:, j]
        else:
            values = _series(name)
        try:
            std, mean, sd = standardize(values)
        except MsfavarError as exc:
            raise type(exc)(f"series {name!r}: {exc}") from None
        columns.append(std)
        scale_rows.append((name, mean, sd))

    panel = TimeSeriesPanel(spec.ordering, dates,
                            np.column_stack(columns),
                            country_code=raw.country_code)
    return panel, scale_rows, lead


def _extract_factor(external: TimeSeriesPanel, dates, q: int):
    """Leading principal components of the external panel over a window."""
    first = external.dates[0].index
    i0 = dates[0].index - first
    i1 = dates[-1].index - first
    if i0 < 0 or i1 >= external.n_periods:
        raise ValidationError(
            f"external panel does not cover {dates[0]}..{dates[-1]}")
    block = external.values[i0:i1 + 1]
    if not np.all(np.isfinite(block)):
        raise ValidationError("external panel has gaps inside the window")
    std_cols = []
    for j, name in enumerate(external.series_names):
        try:
            std, _, _ = standardize(block[:, j])
        except MsfavarError as exc:
            raise type(exc)(f"external series {name!r}: {exc}") from None
        std_cols.append(std)
    return extract_principal_components(np.column_stack(std_cols), q)


def _scaling_csv(rows) -> str:
    lines = ["series,mean,sd"]
    for name, mean, sd in rows:
        lines.append(f"{name},{format(mean, '.17g')},{format(sd, '.17g')}")
    return "\n".join(lines) + "\n"


def cmd_prepare(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args.config, "prepare")
    spec = _spec_with_overrides(cfg, args)
    prep_cfg = cfg.get("prepare", {})
    sv_draws = int(prep_cfg.get("sv_draws", 2000))
    sv_burn = int(prep_cfg.get("sv_burn", 1000))
    seed = 0 if args.seed is None else int(args.seed)
    out = _out_dir(args)

    raw_inputs = []
    for item in args.raw:
        code, sep, path = item.partition("=")
        if sep:
            raw_inputs.append((code, Path(path)))
        else:
            raw_inputs.append((_country_code(Path(item)), Path(item)))

    manifest = RunManifest(command="prepare", seed=seed,
                           config=str(args.config))
    manifest.add_input(args.config)
    manifest.add_input(args.external)
    for _, path in raw_inputs:
        manifest.add_input(path)

    external = load_panel_csv(args.external, country_code="EXT")

    # the factor window must match the prepared window, which depends on
    # the longest transform lead; compute it from the configured ordering
    lead = max(_LEAD[_prepare_recipe(n)[1]]
               for n in spec.ordering if n not in spec.factor_names)
    for idx, (code, path) in enumerate(raw_inputs):
        raw = load_panel_csv(path, country_code=code)
        dates = raw.dates[lead:]
        factor_set = _extract_factor(external, dates, spec.q_factors)
        stream = seeded_stream(seed + idx)
        panel, scale_rows, _ = _prepare_one_country(
            raw, spec, factor_set.factors, stream, sv_draws, sv_burn)
        dest = out / f"prepared_{code}.csv"
        save_panel_csv(panel, dest)
        manifest.add_artifact(out, dest)
        scaling = _write_text(out / f"scaling_{code}.csv",
                              _scaling_csv(scale_rows))
        manifest.add_artifact(out, scaling)
        info = {
            "country": code,
            "window": [str(dates[0]), str(dates[-1])],
            "n_periods": panel.n_periods,
            "factor_explained_variance_share":
                [float(v) for v in factor_set.explained_variance_share],
            "n_external_series": len(external.series_names),
        }
        info_path = _write_text(out / f"prepare_info_{code}.json",
                                json.dumps(info, sort_keys=True, indent=1) + "\n")
        manifest.add_artifact(out, info_path)

    manifest.timing_seconds = time.time() - t0
    manifest.write(out)
    return 0


# ---------------------------------------------------------------------------
# estimate


def _regime_path_csv(dates, filtered, occupancy) -> str:
    lines = ["date,prob_regime0,prob_regime1,occupancy_regime1,mode_state"]
    mode_state = (occupancy > 0.5).astype(int)
    for t, date in enumerate(dates):
        lines.append(
            f"{date},{format(filtered[t, 0], '.17g')},"
            f"{format(filtered[t, 1], '.17g')},"
            f"{format(occupancy[t], '.17g')},{mode_state[t]}")
    return "\n".join(lines) + "\n"


def _estimate_one(panel: TimeSeriesPanel, spec: ModelSpec, rate_name: str,
                  seed: int, dest: Path, manifest: RunManifest,
                  out_root: Path) -> None:
    cols = np.column_stack([panel.column(n) for n in spec.ordering])
    model_panel = TimeSeriesPanel(spec.ordering, panel.dates, cols,
                                  country_code=panel.country_code)
    rate = panel.column(rate_name)
    store = run_gibbs(model_panel, rate, spec, seeded_stream(seed))

    store_dir = dest / "draws"
    store.save(store_dir)
    manifest.add_tree(out_root, store_dir)

    dates_eff = panel.dates[spec.p_lags:]
    filtered = store.arrays["filtered_prob_mean"]
    occupancy = store.arrays["states"].mean(axis=0)
    path_csv = _write_text(dest / "regime_path.csv",
                           _regime_path_csv(dates_eff, filtered, occupancy))
    manifest.add_artifact(out_root, path_csv)

    if spec.n_regimes == 2:
        fig_path = figures.regime_path_figure(
            dates_eff, filtered[:, 1], dest / "regime_path.svg",
            rate=rate[spec.p_lags:], rate_label=rate_name)
        manifest.add_artifact(out_root, fig_path)


def cmd_estimate(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args.config, "estimate")
    spec = _spec_with_overrides(cfg, args)
    rate_name = cfg.get("estimate", {}).get("rate_series", "short_rate")
    seed = 0 if args.seed is None else int(args.seed)
    out = _out_dir(args)

    manifest = RunManifest(command="estimate", seed=seed,
                           config=str(args.config))
    manifest.add_input(args.config)
    panels = [Path(p) for p in args.panel]
    for path in panels:
        manifest.add_input(path)

    multi = len(panels) > 1
    for idx, path in enumerate(panels):
        panel = load_panel_csv(path, country_code=_country_code(path),
                               allow_missing=False)
        dest = out / panel.country_code if multi else out
        _estimate_one(panel, spec, rate_name, seed + idx, dest, manifest, out)

    manifest.timing_seconds = time.time() - t0
    manifest.write(out)
    return 0


# ---------------------------------------------------------------------------
# irf


def cmd_irf(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args.config, "irf")
    spec = _spec_with_overrides(cfg, args)
    out = _out_dir(args)

    try:
        store = DrawStore.load(args.store)
    except OSError as exc:
        raise ValidationError(f"cannot read draw store at {args.store}: {exc}") from exc
    if store.meta.get("spec_hash") != spec_hash(spec):
        raise ValidationError(
            "draw store was produced by a different model specification; "
            "pass the config used for estimation")

    shock = args.shock or cfg.get("irf", {}).get("shock") \
        or spec.ordering[spec.q_factors]
    if shock not in spec.ordering:
        raise ValidationError(f"no variable named {shock!r} to shock")

    manifest = RunManifest(command="irf", seed=0, config=str(args.config))
    manifest.add_input(args.config)
    for p in sorted(Path(args.store).rglob("*")):
        if p.is_file():
            manifest.add_input(p)

    result = summarize_irf(store, spec)
    manifest.add_artifact(out, _write_frame(out / "irf_long.csv",
                                            irf_long_table(result)))

    peaks = summarize_peaks(result, shock)
    detail = peak_table(peaks)
    contract = detail.rename(
        columns={"peak_value": "peak", "peak_quarter": "quarter"})
    contract = contract[["variable", "regime", "peak", "quarter",
                         "significant"]]
    manifest.add_artifact(out, _write_frame(out / "peaks.csv", contract))
    manifest.add_artifact(out, _write_frame(out / "peaks_detail.csv", detail))

    manifest.add_artifact(out, figures.irf_grid_figure(
        result, shock, out / "irf_grid.svg"))
    manifest.add_artifact(out, figures.peak_heatmap_figure(
        peaks, out / "peak_heatmap.svg"))

    manifest.timing_seconds = time.time() - t0
    manifest.write(out)
    return 0


# ---------------------------------------------------------------------------
# simulate and recover


def _dgp_from_config(cfg: dict, seed: int | None):
    dgp_cfg = cfg.get("dgp", {})
    kind = dgp_cfg.get("kind", "well_separated")
    t_len = int(dgp_cfg.get("t_len", 300))
    if kind == "well_separated":
        base = sim.well_separated_dgp(t_len=t_len)
    elif kind == "linear":
        base = sim.linear_dgp(t_len=t_len)
    else:
        raise ValidationError(
            f"dgp kind must be well_separated or linear, got {kind!r}")
    if seed is not None:
        from dataclasses import replace

        base = replace(base, seed=seed)
    return kind, base


def cmd_simulate(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args.config, "simulate", required=False)
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else \
        (int(cfg["dgp"]["seed"]) if cfg.get("dgp", {}).get("seed") else None)

    manifest = RunManifest(command="simulate", seed=-1,
                           config=str(args.config) if args.config else None)
    if args.config:
        manifest.add_input(args.config)

    if args.raw_countries:
        base = 0 if seed is None else seed
        manifest.seed = base
        n_quarters = int(cfg.get("dgp", {}).get("raw_quarters", 79))
        for i in range(args.raw_countries):
            code = f"C{i + 1:02d}"
            raw = sim.synthetic_raw_country(code, seed=base + i,
                                            n_quarters=n_quarters)
            dest = out / f"raw_{code}.csv"
            save_panel_csv(raw, dest)
            manifest.add_artifact(out, dest)
        external = sim.synthetic_external_panel(seed=base + 1000,
                                                n_quarters=n_quarters)
        dest = out / "external.csv"
        save_panel_csv(external, dest)
        manifest.add_artifact(out, dest)
    else:
        kind, dgp = _dgp_from_config(cfg, seed)
        manifest.seed = dgp.seed
        x, rates, states = sim.simulate_msvar(dgp)
        start = Quarter.parse(cfg.get("dgp", {}).get("start", "2000Q1"))
        lines = ["date," + ",".join(f"y{j}" for j in range(dgp.k))
                 + ",rate,state"]
        for t in range(x.shape[0]):
            cells = [format(v, ".17g") for v in x[t]]
            lines.append(f"{start.shift(t)},{','.join(cells)},"
                         f"{format(rates[t], '.17g')},{states[t]}")
        data_path = _write_text(out / "sim_data.csv", "\n".join(lines) + "\n")
        manifest.add_artifact(out, data_path)
        info = {
            "kind": kind,
            "seed": dgp.seed,
            "t_len": dgp.t_len,
            "k": dgp.k,
            "p": dgp.p,
            "beta": dgp.beta.tolist(),
            "omega": dgp.omega.tolist(),
            "probit_c0": list(dgp.probit_c0),
            "probit_gamma": dgp.probit_gamma,
        }
        info_path = _write_text(out / "dgp.json",
                                json.dumps(info, sort_keys=True, indent=1) + "\n")
        manifest.add_artifact(out, info_path)

    manifest.timing_seconds = time.time() - t0
    manifest.write(out)
    return 0


def cmd_recover(args) -> int:
    t0 = time.time()
    cfg = _load_cfg(args.config, "recover", required=False)
    rec_cfg = cfg.get("recover", {})
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else \
        (int(cfg["dgp"]["seed"]) if cfg.get("dgp", {}).get("seed") else None)

    kind, dgp = _dgp_from_config(cfg, seed)
    if args.mode is not None:
        regime_mode = _MODE_NAMES[args.mode]
    elif "mode" in rec_cfg:
        regime_mode = _MODE_NAMES[rec_cfg["mode"]]
    else:
        regime_mode = "endogenous_markov" if kind == "well_separated" \
            else "linear"
    n_draws = args.draws if args.draws is not None \
        else int(rec_cfg.get("n_draws", 1000))
    n_burn = args.burn if args.burn is not None \
        else int(rec_cfg.get("n_burn", 400))
    n_reps = args.replications if args.replications is not None \
        else int(rec_cfg.get("n_replications", 10))
    label_rule = rec_cfg.get("label_rule", "none")

    break_date = Quarter.parse(args.break_date) if args.break_date else None
    spec = sim.recovery_model_spec(dgp, regime_mode, n_draws=n_draws,
                                   n_burn=n_burn, label_rule=label_rule,
                                   break_date=break_date)
    report = sim.recovery_report(dgp, spec, n_replications=n_reps,
                                 n_jobs=args.jobs)

    manifest = RunManifest(command="recover", seed=dgp.seed,
                           config=str(args.config) if args.config else None)
    if args.config:
        manifest.add_input(args.config)
    manifest.add_artifact(out, _write_text(out / "recovery.csv",
                                           report.to_delimited()))
    summary_path = _write_text(
        out / "recovery_summary.json",
        json.dumps(report.summary(), sort_keys=True, indent=1) + "\n")
    manifest.add_artifact(out, summary_path)

    manifest.timing_seconds = time.time() - t0
    manifest.write(out)
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    out = Path(args.out)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {out}")
    data = json.loads(manifest_path.read_text())

    lines = [
        f"command: {data.get('command')}",
        f"seed: {data.get('seed')}",
        f"config: {data.get('config')}",
        f"timing_seconds: {data.get('timing_seconds')}",
        "versions: " + ", ".join(
            f"{k} {v}" for k, v in sorted(data.get("versions", {}).items())),
        "",
        f"inputs ({len(data.get('inputs', {}))}):",
    ]
    for path, digest in sorted(data.get("inputs", {}).items()):
        lines.append(f"  {path}  {digest[:12]}")
    lines.append("")
    artifacts = data.get("artifacts", {})
    lines.append(f"artifacts ({len(artifacts)}):")
    n_bad = 0
    for rel, digest in sorted(artifacts.items()):
        target = out / rel
        if not target.exists():
            status = "MISSING"
            n_bad += 1
        elif sha256_file(target) != digest:
            status = "CHANGED"
            n_bad += 1
        else:
            status = "ok"
        lines.append(f"  {rel}  {digest[:12]}  {status}")
    lines.append("")

    peaks_path = out / "peaks.csv"
    if peaks_path.exists():
        peaks = pd.read_csv(peaks_path)
        for regime, group in peaks.groupby("regime"):
            n_sig = int(group["significant"].sum())
            lines.append(f"regime {regime}: {n_sig}/{len(group)} "
                         "significant peak responses")
    rec_path = out / "recovery_summary.json"
    if rec_path.exists():
        rec = json.loads(rec_path.read_text())
        lines.append(f"recovery: {rec.get('n_replications')} replications, "
                     f"{rec.get('n_failures')} failures, state accuracy "
                     f"{rec.get('state_accuracy_mean')}")
    regime_path = out / "regime_path.csv"
    if regime_path.exists():
        path_df = pd.read_csv(regime_path)
        share = float(path_df["mode_state"].mean())
        lines.append(f"regime path: {share:.3f} of periods in regime 1")
    lines.append("")
    if n_bad:
        lines.append(f"verification: {n_bad} artifact(s) missing or changed")
    else:
        lines.append("verification: all artifacts match their digests")

    text = "\n".join(lines) + "\n"
    _write_text(out / "report.txt", text)
    sys.stdout.write(text)
    return 0 if n_bad == 0 else 4


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msfavar",
        description="regime-switching factor-augmented VAR pipeline")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="INI configuration file")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for the run's random stream")
    common.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (created if absent)")

    modal = argparse.ArgumentParser(add_help=False)
    modal.add_argument("--mode", choices=sorted(_MODE_NAMES), default=None,
                       help="override the configured regime mode")
    modal.add_argument("--break-date", default=None, metavar="YYYYQn",
                       help="break quarter for break mode")
    modal.add_argument("--draws", type=int, default=None,
                       help="override retained draw count")
    modal.add_argument("--burn", type=int, default=None,
                       help="override burn-in sweep count")

    p = sub.add_parser("prepare", parents=[common],
                       help="transform raw panels into estimation panels")
    p.add_argument("--raw", action="append", required=True,
                   metavar="CODE=PATH",
                   help="raw country panel (repeatable); bare PATH uses "
                        "the file stem as the country code")
    p.add_argument("--external", type=Path, required=True,
                   help="external panel for factor extraction")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("estimate", parents=[common, modal],
                       help="run the sampler on prepared panels")
    p.add_argument("--panel", action="append", required=True, metavar="PATH",
                   help="prepared panel (repeat to loop over countries; "
                        "country i uses seed + i)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("irf", parents=[common, modal],
                       help="impulse responses and peak tables from a store")
    p.add_argument("--store", type=Path, required=True,
                   help="draw store directory written by estimate")
    p.add_argument("--shock", default=None,
                   help="shocked variable (default: first after the "
                        "factor block)")
    p.set_defaults(func=cmd_irf)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate synthetic data")
    p.add_argument("--raw-countries", type=int, default=0, metavar="N",
                   help="emit N raw-style country panels plus an external "
                        "panel instead of model-space arrays")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", parents=[common, modal],
                       help="Monte Carlo recovery study")
    p.add_argument("--replications", type=int, default=None, metavar="N",
                   help="independent recovery replications")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="concurrent replications")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("report", parents=[common],
                       help="verify and summarize a run directory")
    p.set_defaults(func=cmd_report)

    return parser


_INPUT_ERRORS = (ValidationError, DomainError, InsufficientDataError,
                 DegenerateSeriesError, UnsupportedGapError, RankError)


def _failure_exit(exc: BaseException) -> int:
    if isinstance(exc, (NumericalError, DegenerateLikelihoodError)):
        code = 3
    elif isinstance(exc, _INPUT_ERRORS):
        code = 2
    elif isinstance(exc, MsfavarError):
        code = 4
    else:
        code = 1
    payload = {"error": type(exc).__name__, "message": str(exc)}
    sweep = getattr(exc, "sweep", None)
    if sweep is not None:
        payload["sweep"] = int(sweep)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
        return 0 if rc is None else int(rc)
    except MsfavarError as exc:
        return _failure_exit(exc)
    except Exception as exc:
        traceback.print_exc()
        return _failure_exit(exc)


if __name__ == "__main__":
    sys.exit(main())
