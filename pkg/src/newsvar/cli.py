"""Config-driven command line front end.

Subcommands: ``build-index``, ``convert-calendar``, ``estimate``,
``dynamics``, ``reduced-form``, ``validate``.  Every command reads a JSON
config (see README for the schema), writes its outputs under the configured
directory, and is deterministic given config plus seed.

Exit codes: 0 success, 1 usage/config error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import bootstrap as boot
from . import dynamics as dyn
from . import intensity as ix
from . import regression as reg
from . import svar as sv
from . import timeseries as ts
from .errors import NewsvarError

__all__ = ["main", "PipelineConfig", "UsageError"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


@dataclass(frozen=True)
class PipelineConfig:
    """Validated view of the JSON config file."""

    raw: Mapping[str, object]
    base_dir: Path
    out_dir: Path
    seed: int

    @staticmethod
    def load(path: str | Path, out_override: str | None = None, seed_override: int | None = None) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"--config: no such file: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: invalid JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("--config: top level must be a JSON object")
        base = path.parent
        out_dir = Path(out_override) if out_override else base / str(raw.get("out_dir", "out"))
        seed = seed_override if seed_override is not None else _coerce(int, raw.get("seed", 0), "seed")
        return PipelineConfig(raw=raw, base_dir=base, out_dir=out_dir, seed=seed)

    def section(self, name: str) -> Mapping[str, object]:
        section = self.raw.get(name)
        if not isinstance(section, dict):
            raise UsageError(f"config lacks a {name!r} section")
        return section

    def path(self, section: Mapping[str, object], key: str, required: bool = True) -> Path | None:
        value = section.get(key)
        if value is None:
            if required:
                raise UsageError(f"config key {key!r} is required")
            return None
        resolved = self.base_dir / str(value)
        if not resolved.is_file():
            raise UsageError(f"config key {key!r}: no such file: {resolved}")
        return resolved


def _coerce(fn, value: object, what: str):
    try:
        return fn(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config key {what!r}: {exc}") from exc


def _parse_window(values: object, what: str) -> tuple[ts.PeriodLabel | None, ts.PeriodLabel | None]:
    if values is None:
        return (None, None)
    if not isinstance(values, (list, tuple)) or len(values) != 2:
        raise UsageError(f"{what} must be a [start, end] pair")
    out = []
    for v in values:
        if v is None:
            out.append(None)
            continue
        try:
            out.append(ts.PeriodLabel.parse(str(v))[0])
        except NewsvarError as exc:
            raise UsageError(f"{what}: {exc}") from exc
    return out[0], out[1]


def _json_dump(payload: object, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# build-index
# ---------------------------------------------------------------------------


def _monthly_index(panel: ix.ArticleCountPanel, variant: str) -> ts.CalendarSeries:
    if variant == "standardized":
        return ix.standardized_monthly_count(panel)
    if variant == "simple":
        return ix.monthly_mean_count(panel)
    raise UsageError(f"index variant must be 'simple' or 'standardized', got {variant!r}")


def _counts_to_index(
    counts_path: Path,
    variant: str,
    target: ts.Frequency,
    window: tuple[ts.PeriodLabel | None, ts.PeriodLabel | None],
    kind: ix.IndexKind,
    span: tuple[ts.PeriodLabel, ts.PeriodLabel] | None = None,
) -> ix.IntensityIndex:
    panel = ix.read_counts_csv(counts_path)
    monthly = _monthly_index(panel, variant)
    series = monthly if target is ts.Frequency.MONTHLY else ts.aggregate(monthly, target, "mean")
    if span is not None:
        series = ts.pad_span(series, *span)
    return ix.normalize_unit_max(series, window=window, kind=kind)


def _mask_panel_months(
    panel: ix.ArticleCountPanel, lo: ts.PeriodLabel, hi: ts.PeriodLabel, freq: ts.Frequency
) -> ix.ArticleCountPanel | None:
    lo_idx, hi_idx = lo.to_index(freq), hi.to_index(freq)
    step = 12 // freq.periods_per_year
    keep_lo, keep_hi = lo_idx * step, hi_idx * step + step - 1
    counts = {}
    for outlet, per_outlet in panel.counts.items():
        kept = {
            day: c
            for day, c in per_outlet.items()
            if keep_lo <= day.year * 12 + day.month - 1 <= keep_hi
        }
        counts[outlet] = kept
    if not any(counts.values()):
        return None
    return ix.ArticleCountPanel(outlets=panel.outlets, counts=counts)


def _windowed_off_index(
    counts_path: Path,
    windows: list[object],
    variant: str,
    target: ts.Frequency,
    norm_window: tuple[ts.PeriodLabel | None, ts.PeriodLabel | None],
    span: tuple[ts.PeriodLabel, ts.PeriodLabel],
) -> ix.IntensityIndex:
    """Build the lifting-coverage index over disjoint search windows.

    Counts are masked per window, each window is averaged (and, for the
    standardized variant, scaled by its own within-window dispersion), and
    the pieces are embedded in the full span with zeros in between.
    """
    panel = ix.read_counts_csv(counts_path)
    combined = ts.CalendarSeries(
        frequency=target,
        calendar=ts.CalendarKind.GREGORIAN,
        start=span[0],
        values=np.zeros(span[1].to_index(target) - span[0].to_index(target) + 1),
    )
    values = combined.values.copy()
    covered = np.zeros(len(values), dtype=bool)
    for entry in windows:
        w_lo, w_hi = _parse_window(entry, "off window")
        if w_lo is None or w_hi is None:
            raise UsageError("off windows must be [start, end] pairs")
        masked = _mask_panel_months(panel, w_lo, w_hi, target)
        if masked is None:
            raise UsageError(f"off window {entry} contains no count data")
        monthly = _monthly_index(masked, variant)
        piece = monthly if target is ts.Frequency.MONTHLY else ts.aggregate(monthly, target, "mean")
        offset = piece.start.to_index(target) - span[0].to_index(target)
        if offset < 0 or offset + len(piece) > len(values):
            raise UsageError(f"off window {entry} falls outside the index span")
        if covered[offset : offset + len(piece)].any():
            raise UsageError("off windows overlap")
        values[offset : offset + len(piece)] = piece.values
        covered[offset : offset + len(piece)] = True
    return ix.normalize_unit_max(
        combined.replace_values(values), window=norm_window, kind=ix.IndexKind.OFF
    )


def cmd_build_index(config: PipelineConfig) -> int:
    section = config.section("index")
    variant = str(section.get("variant", "simple"))
    target = _coerce(ts.Frequency, str(section.get("target_frequency", "quarterly")), "target_frequency")
    window = _parse_window(section.get("normalization_window"), "normalization_window")
    config.out_dir.mkdir(parents=True, exist_ok=True)

    on_index = _counts_to_index(
        config.path(section, "on_counts"), variant, target, window, ix.IndexKind.ON
    )
    ix.write_index_csv(on_index, config.out_dir / "index_on.csv")
    diagnostics: dict[str, object] = {
        "variant": variant,
        "target_frequency": target.value,
        "on_normalization_max": on_index.normalization_max,
    }

    off_path = config.path(section, "off_counts", required=False)
    if off_path is None:
        _json_dump(diagnostics, config.out_dir / "index_diagnostics.json")
        return EXIT_OK

    span = (on_index.series.start, on_index.series.end)
    off_windows = section.get("off_windows")
    if off_windows is not None:
        if not isinstance(off_windows, list) or not off_windows:
            raise UsageError("off_windows must be a non-empty list of [start, end] pairs")
        off_index = _windowed_off_index(off_path, off_windows, variant, target, window, span)
    else:
        off_index = _counts_to_index(
            off_path, variant, target, window, ix.IndexKind.OFF, span=span
        )
    ix.write_index_csv(off_index, config.out_dir / "index_off.csv")
    diagnostics["off_normalization_max"] = off_index.normalization_max

    weight = section.get("weight")
    if weight is not None:
        w_hat = _coerce(float, weight, "weight")
        diagnostics["weight"] = {"value": w_hat, "source": "fixed"}
    else:
        dy_path = config.path(section, "output_growth", required=False)
        if dy_path is None:
            raise UsageError("config key 'output_growth' is required for grid search")
        dy = ts.read_series_csv(dy_path)
        result = ix.grid_search_weight(
            on_index, off_index, dy, grid_step=_coerce(float, section.get("grid_step", 0.1), "grid_step")
        )
        w_hat = result.w_hat
        diagnostics["weight"] = {
            "value": w_hat,
            "source": "grid_search",
            "nobs": result.nobs,
            "relative_ssr_spread": result.relative_ssr_spread,
            "profile": [
                {"w": p.weight, "ssr": p.ssr, "loglik": p.loglik} for p in result.points
            ],
        }
    net = ix.net_index(on_index, off_index, w_hat)
    ix.write_index_csv(net, config.out_dir / "index_net.csv")
    _json_dump(diagnostics, config.out_dir / "index_diagnostics.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# convert-calendar
# ---------------------------------------------------------------------------

_CONVERTERS = {
    ts.Frequency.ANNUAL: ts.convert_iranian_annual,
    ts.Frequency.QUARTERLY: ts.convert_iranian_quarterly,
    ts.Frequency.MONTHLY: ts.convert_iranian_monthly,
}


def cmd_convert_calendar(config: PipelineConfig) -> int:
    section = config.section("calendar")
    series = ts.read_series_csv(config.path(section, "input"), calendar=ts.CalendarKind.IRANIAN)
    converted = _CONVERTERS[series.frequency](series)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ts.write_series_csv(converted, config.out_dir / "converted.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate / dynamics
# ---------------------------------------------------------------------------


def _load_model(config: PipelineConfig) -> tuple[sv.SvarSpec, dict[str, ts.CalendarSeries], Mapping[str, object]]:
    section = config.section("model")
    spec_path = config.path(section, "spec")
    try:
        spec = sv.SvarSpec.from_json(json.loads(spec_path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise UsageError(f"model spec {spec_path}: invalid JSON: {exc}") from exc
    data_map = section.get("data")
    if not isinstance(data_map, dict) or not data_map:
        raise UsageError("config key 'data' must map variable names to CSV paths")
    data = {}
    for name, rel in data_map.items():
        csv_path = config.base_dir / str(rel)
        if not csv_path.is_file():
            raise UsageError(f"config key 'data.{name}': no such file: {csv_path}")
        data[str(name)] = ts.read_series_csv(csv_path)
    return spec, data, section


def _estimate(config: PipelineConfig) -> tuple[sv.SvarEstimate, dict[str, ts.CalendarSeries], Mapping[str, object], sv.SvarSpec]:
    spec, data, section = _load_model(config)
    est = sv.estimate_svar(spec, data, controls_var1=bool(section.get("controls_var1", False)))
    return est, data, section, spec


def cmd_estimate(config: PipelineConfig) -> int:
    est, _, _, _ = _estimate(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _json_dump(sv.estimate_to_json(est), config.out_dir / "estimate.json")
    for name, fit in zip(est.variables, est.fits):
        bg = reg.breusch_godfrey(fit, lags=4)
        reg.write_fit_csv(
            fit,
            config.out_dir / f"eq_{name}.csv",
            extra_rows=(
                ("bg_lm_stat_lag4", f"{bg.lm_stat:.6f}"),
                ("bg_p_value", f"{bg.p_value:.6f}"),
            ),
        )
    return EXIT_OK


def cmd_dynamics(config: PipelineConfig) -> int:
    est, data, section, spec = _estimate(config)
    horizon = _coerce(int, section.get("horizon", 24), "horizon")
    shocked = section.get("shocked_control")
    shocked = str(shocked) if shocked is not None else None
    method = str(section.get("method", "direct"))
    config.out_dir.mkdir(parents=True, exist_ok=True)

    if method == "both":
        deviation = dyn.max_method_deviation(est, horizon, shocked)
        _json_dump(
            {"max_abs_deviation": deviation, "tolerance": 1e-10},
            config.out_dir / "method_check.json",
        )
        method = "direct"
    elif method not in ("direct", "stacked"):
        raise UsageError(f"method must be direct, stacked, or both; got {method!r}")
    # variance shares first: their stationarity refusal carries the
    # eigenvalue report users need
    fv = dyn.fevd(est, horizon, shocked, method=method)
    irf = dyn.irf_all(est, horizon, shocked, method=method)

    bands = None
    boot_cfg = section.get("bootstrap")
    if isinstance(boot_cfg, dict):
        quantiles = boot_cfg.get("quantiles", (0.05, 0.95))
        bands = boot.bootstrap_irf(
            est,
            data,
            spec,
            horizon=horizon,
            replications=_coerce(int, boot_cfg.get("replications", 1000), "replications"),
            quantiles=(
                _coerce(float, quantiles[0], "quantiles"),
                _coerce(float, quantiles[1], "quantiles"),
            ),
            seed=_coerce(int, boot_cfg.get("seed", config.seed), "bootstrap.seed"),
            joint_resampling=bool(boot_cfg.get("joint", False)),
            shocked_control=shocked,
        )
        boot.write_bands_metadata(bands, config.out_dir / "bootstrap_meta.json")
    dyn.write_irf_csv(irf, config.out_dir / "irf.csv", bands=bands)
    dyn.write_fevd_csv(fv, config.out_dir / "fevd.csv")
    _json_dump(dyn.plot_data_json(irf, bands=bands), config.out_dir / "plot_irf.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reduced-form
# ---------------------------------------------------------------------------


def cmd_reduced_form(config: PipelineConfig) -> int:
    section = config.section("reduced_form")
    intervention = ts.read_series_csv(config.path(section, "intervention"))

    region_path = config.path(section, "region_levels", required=False)
    if region_path is not None:
        levels_path = config.path(section, "domestic_levels")
        growth = reg.relative_series(
            ts.read_series_csv(levels_path), ts.read_series_csv(region_path)
        )
    else:
        growth = ts.read_series_csv(config.path(section, "growth"))

    base: dict[str, ts.CalendarSeries] = {"dy.L1": ts.lag(growth, 1)}
    s_lags = section.get("intervention_lags", [1])
    if not isinstance(s_lags, list) or not s_lags:
        raise UsageError("intervention_lags must be a non-empty list")
    effect_names = []
    for lag_ in s_lags:
        lag_ = _coerce(int, lag_, "intervention_lags")
        name = "s" if lag_ == 0 else f"s.L{lag_}"
        base[name] = ts.lag(intervention, lag_)
        effect_names.append(name)
    controls_map = section.get("controls", {})
    if not isinstance(controls_map, dict):
        raise UsageError("config key 'controls' must map names to CSV paths")
    for name, rel in controls_map.items():
        csv_path = config.base_dir / str(rel)
        if not csv_path.is_file():
            raise UsageError(f"config key 'controls.{name}': no such file: {csv_path}")
        base[str(name)] = ts.read_series_csv(csv_path)

    arrays, _ = ts.align(growth, *base.values())
    fit = reg.ols(arrays[0], np.column_stack(arrays[1:]), names=tuple(base))
    effect = reg.long_run_effect(fit, effect_names, "dy.L1")
    bg = reg.breusch_godfrey(fit, lags=4)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    reg.write_fit_csv(
        fit,
        config.out_dir / "reduced_form.csv",
        extra_rows=(
            ("long_run_effect", f"{effect.theta:.6f}"),
            ("long_run_effect_se", f"{effect.se:.6f}"),
            ("bg_lm_stat_lag4", f"{bg.lm_stat:.6f}"),
            ("bg_p_value", f"{bg.p_value:.6f}"),
        ),
    )
    payload = reg.fit_to_json(fit)
    payload["long_run_effect"] = {"theta": effect.theta, "se": effect.se}
    payload["relative_to_region"] = region_path is not None
    _json_dump(payload, config.out_dir / "reduced_form.json")
    return EXIT_OK


def cmd_validate(config: PipelineConfig) -> int:
    known = {"out_dir", "seed", "index", "calendar", "model", "reduced_form"}
    unknown = set(config.raw) - known
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    for name in ("index", "calendar", "model", "reduced_form"):
        section = config.raw.get(name)
        if section is not None and not isinstance(section, dict):
            raise UsageError(f"config section {name!r} must be an object")
    # resolve every referenced path now rather than at run time
    if "index" in config.raw:
        section = config.section("index")
        config.path(section, "on_counts")
        config.path(section, "off_counts", required=False)
        config.path(section, "output_growth", required=False)
    if "calendar" in config.raw:
        config.path(config.section("calendar"), "input")
    if "model" in config.raw:
        _load_model(config)
    if "reduced_form" in config.raw:
        section = config.section("reduced_form")
        config.path(section, "intervention")
        if section.get("region_levels") is not None:
            config.path(section, "region_levels")
            config.path(section, "domestic_levels")
        else:
            config.path(section, "growth")
        controls_map = section.get("controls", {})
        if isinstance(controls_map, dict):
            for name, rel in controls_map.items():
                if not (config.base_dir / str(rel)).is_file():
                    raise UsageError(f"config key 'controls.{name}': no such file: {rel}")
    print("config ok")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "build-index": cmd_build_index,
    "convert-calendar": cmd_convert_calendar,
    "estimate": cmd_estimate,
    "dynamics": cmd_dynamics,
    "reduced-form": cmd_reduced_form,
    "validate": cmd_validate,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newsvar", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = PipelineConfig.load(args.config, out_override=args.out, seed_override=args.seed)
        return _COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NewsvarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
