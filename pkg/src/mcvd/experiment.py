"""Experiment harness: sweep grids, result serialization, and validation.

An :class:`ExperimentSpec` describes a (distance x transmitter-radius) grid
of angular sweeps.  ``run_experiment`` executes every grid point, writes one
histogram CSV and one pattern CSV per point, and a single ``summary.json``
with the fully resolved configuration and all metrics, so a run can be
reproduced exactly from its own output.

Spec files are flat ``key = value`` text; lists are comma separated and
unknown keys are hard errors.  The paper-figure presets (fig3..fig6) are
built in.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

from . import __version__
from .channel import ChannelParams, hit_fraction
from .geometry import PIVOT_EMISSION, PIVOT_TX_CENTER, TopologyError, measurement_topology
from .metrics import (
    DEFAULT_SMOOTHING_WINDOW,
    MetricsError,
    counts_until,
    directivity_gain,
    half_power_width,
    histogram_peak_time,
    pattern_from_sweep,
)
from .rng import derive_substream_seed
from .sim import (
    ABSORPTION_BRIDGE,
    ABSORPTION_ENDPOINT,
    SimConfig,
    SimulationConfigError,
    run_single,
    run_sweep,
)

DEFAULT_ANGLES = tuple(float(a) for a in range(0, 181, 10))
DEFAULT_N = 40000
DEFAULT_D_COEFF = 100.0
DEFAULT_R_RX = 5.0
DEFAULT_DT = 1e-4
DEFAULT_SEED = 1202
T_END_PER_DISTANCE = 0.1  # s/µm²: t_end = d² * 0.1 unless overridden

HISTOGRAM_HEADER = ["angle_deg", "bin_start_s", "bin_end_s", "count"]
PATTERN_HEADER = ["angle_deg", "counts_at_ts", "gain", "peak_time_s"]


class ConfigError(ValueError):
    """Invalid experiment specification or spec file."""


class ValidationFailure(RuntimeError):
    """Point-source validation exceeded its statistical bound."""


@dataclass
class ExperimentSpec:
    """Resolved description of one experiment grid."""

    name: str
    d_values: list[float]
    r_tx_values: list[float]
    t_s_values: list[float]  # aligned with d_values
    n_molecules: int = DEFAULT_N
    diffusion: float = DEFAULT_D_COEFF
    r_rx: float = DEFAULT_R_RX
    dt: float = DEFAULT_DT
    seed: int = DEFAULT_SEED
    bin_width: float | None = None  # per-run default: t_end / 1000
    t_end_values: list[float] | None = None  # aligned with d_values
    angles_deg: list[float] = field(default_factory=lambda: list(DEFAULT_ANGLES))
    smoothing_window: int = DEFAULT_SMOOTHING_WINDOW
    pivot: str = PIVOT_TX_CENTER
    absorption: str = ABSORPTION_BRIDGE
    simulated_reference: bool = False
    output_dir: str | None = None

    def t_end_for(self, d: float) -> float:
        if self.t_end_values is not None:
            return self.t_end_values[self.d_values.index(d)]
        return d * d * T_END_PER_DISTANCE

    def t_s_for(self, d: float) -> float:
        return self.t_s_values[self.d_values.index(d)]

    def validate(self) -> None:
        if not self.d_values:
            return  # empty grid is a valid no-op experiment
        if len(self.t_s_values) != len(self.d_values):
            raise ConfigError("t_s must have one value per distance")
        if self.t_end_values is not None and len(self.t_end_values) != len(self.d_values):
            raise ConfigError("t_end must have one value per distance")
        for d in self.d_values:
            if d <= 0:
                raise ConfigError(f"distance must be > 0, got {d}")
            if self.t_s_for(d) <= 0:
                raise ConfigError(f"t_s must be > 0, got {self.t_s_for(d)} for d={d}")
            if self.t_s_for(d) > self.t_end_for(d) * (1 + 1e-12):
                raise ConfigError(
                    f"t_s={self.t_s_for(d)} exceeds t_end={self.t_end_for(d)} for d={d}"
                )
        for r_tx in self.r_tx_values:
            if r_tx < 0:
                raise ConfigError(f"r_tx must be >= 0, got {r_tx}")
        if not self.angles_deg:
            raise ConfigError("angle list must not be empty")
        # every grid combination must yield a valid topology before anything runs
        for d in self.d_values:
            for r_tx in self.r_tx_values:
                for alpha in self.angles_deg:
                    try:
                        measurement_topology(
                            d=d, r_tx=r_tx, r_rx=self.r_rx, alpha_deg=alpha, pivot=self.pivot
                        )
                    except (TopologyError, ValueError) as exc:
                        raise ConfigError(
                            f"invalid topology for d={d}, r_tx={r_tx}, alpha={alpha}: {exc}"
                        ) from exc


def _parse_scalar(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip()


_LIST_KEYS = {"d", "r_tx", "t_s", "t_end", "angles"}
_SCALAR_KEYS = {
    "name", "N", "D", "r_rx", "dt", "seed", "bin_width", "smoothing_window",
    "pivot", "absorption", "simulated_reference", "out",
}


def parse_spec_text(text: str, name_hint: str = "experiment") -> ExperimentSpec:
    """Parse the flat key=value spec format.  Unknown keys are hard errors."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _LIST_KEYS:
            raw[key] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        elif key in _SCALAR_KEYS:
            raw[key] = _parse_scalar(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    def numbers(key) -> list[float] | None:
        if key not in raw:
            return None
        vals = raw[key]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError(f"{key} must be a list of numbers")
        return [float(v) for v in vals]

    d_values = numbers("d")
    if d_values is None:
        raise ConfigError("spec must define at least 'd' (distances)")
    r_tx_values = numbers("r_tx")
    if r_tx_values is None:
        raise ConfigError("spec must define 'r_tx' (transmitter radii)")
    t_s = numbers("t_s")
    if t_s is None:
        raise ConfigError("spec must define 't_s'")
    if len(t_s) == 1:
        t_s = t_s * len(d_values)
    t_end = numbers("t_end")
    if t_end is not None and len(t_end) == 1:
        t_end = t_end * len(d_values)

    spec = ExperimentSpec(
        name=str(raw.get("name", name_hint)),
        d_values=d_values,
        r_tx_values=r_tx_values,
        t_s_values=t_s,
        t_end_values=t_end,
        angles_deg=numbers("angles") or list(DEFAULT_ANGLES),
        n_molecules=int(raw.get("N", DEFAULT_N)),
        diffusion=float(raw.get("D", DEFAULT_D_COEFF)),
        r_rx=float(raw.get("r_rx", DEFAULT_R_RX)),
        dt=float(raw.get("dt", DEFAULT_DT)),
        seed=int(raw.get("seed", DEFAULT_SEED)),
        bin_width=float(raw["bin_width"]) if "bin_width" in raw else None,
        smoothing_window=int(raw.get("smoothing_window", DEFAULT_SMOOTHING_WINDOW)),
        pivot=str(raw.get("pivot", PIVOT_TX_CENTER)),
        absorption=str(raw.get("absorption", ABSORPTION_BRIDGE)),
        simulated_reference=bool(raw.get("simulated_reference", False)),
        output_dir=str(raw["out"]) if "out" in raw else None,
    )
    if spec.pivot not in (PIVOT_TX_CENTER, PIVOT_EMISSION):
        raise ConfigError(f"pivot must be tx_center or emission, got {spec.pivot!r}")
    if spec.absorption not in (ABSORPTION_BRIDGE, ABSORPTION_ENDPOINT):
        raise ConfigError(f"absorption must be bridge or endpoint, got {spec.absorption!r}")
    spec.validate()
    return spec


def parse_spec_file(path: str) -> ExperimentSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    name_hint = os.path.splitext(os.path.basename(path))[0]
    return parse_spec_text(text, name_hint=name_hint)


def preset(name: str) -> ExperimentSpec:
    """Paper-figure presets.

    fig3: polar pattern, d=2, t_s=0.2.  fig4: peak time vs angle, d=4,
    t_s=0.8.  fig5: HPPW vs transmitter radius, d in {2,4,6}, t_s=0.2.
    fig6: directivity gain vs angle, d=6, t_s=1.8.
    """
    radii = [2.5, 5.0, 7.5]
    table = {
        "fig3": dict(d_values=[2.0], t_s_values=[0.2]),
        "fig4": dict(d_values=[4.0], t_s_values=[0.8]),
        "fig5": dict(d_values=[2.0, 4.0, 6.0], t_s_values=[0.2, 0.2, 0.2]),
        "fig6": dict(d_values=[6.0], t_s_values=[1.8]),
    }
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(table))}")
    spec = ExperimentSpec(name=name, r_tx_values=list(radii), **table[name])
    spec.validate()
    return spec


PRESET_NAMES = ("fig3", "fig4", "fig5", "fig6")


def _fmt(value: float) -> str:
    """Stable shortest-roundtrip float formatting for CSV bodies."""
    return repr(float(value))


def _grid_tag(d: float, r_tx: float) -> str:
    return f"d{d:g}_rtx{r_tx:g}"


def _grid_seed(spec_seed: int, d: float, r_tx: float) -> int:
    key = (int(round(d * 1e6)) << 21) ^ int(round(r_tx * 1e6))
    return derive_substream_seed(spec_seed, key)


def _write_rows(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _write_records_json(path: str, header: list[str], rows) -> None:
    records = [dict(zip(header, row)) for row in rows]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=1)
        fh.write("\n")


def run_experiment(
    spec: ExperimentSpec,
    output_dir: str | None = None,
    file_format: str = "csv",
    validate_points: bool = False,
) -> dict:
    """Run the whole grid and serialize results; returns the summary dict.

    Histogram/pattern tables are written per (d, r_tx) grid point in
    ``file_format`` ("csv" or "json"); the summary is always JSON.  A grid
    point that fails at runtime is recorded under its ``error`` key and the
    remaining points still complete.
    """
    if file_format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {file_format!r}")
    spec.validate()
    out_dir = output_dir or spec.output_dir or f"{spec.name}_results"
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")

    ext = "csv" if file_format == "csv" else "json"
    write_table = _write_rows if file_format == "csv" else _write_records_json
    metrics_records = []
    for d in spec.d_values:
        t_end = spec.t_end_for(d)
        t_s = spec.t_s_for(d)
        channel = ChannelParams(spec.diffusion, d, spec.r_rx)
        analytic_reference = spec.n_molecules * hit_fraction(channel, t_s)
        reference = analytic_reference
        reference_mode = "analytic"
        if spec.simulated_reference:
            ref_base = _base_config(spec, d, 0.0, t_end)
            ref_sweep = run_sweep(ref_base, [0.0])
            ref_hist = ref_sweep.histograms.get(0.0)
            if ref_hist is not None:
                reference = counts_until(ref_hist, t_s)
                reference_mode = "simulated"

        r_tx_list = list(spec.r_tx_values)
        for r_tx in r_tx_list:
            record = {
                "d": d,
                "r_tx": r_tx,
                "t_s": t_s,
                "t_end": t_end,
                "seed": _grid_seed(spec.seed, d, r_tx),
                "point_reference_counts": reference,
                "point_reference_mode": reference_mode,
                "hppw_deg": None,
                "gain_by_angle": {},
                "peak_time_by_angle": {},
                "counts_at_ts_by_angle": {},
                "files": {},
                "error": None,
                "failed_angles": {},
            }
            metrics_records.append(record)
            try:
                base = _base_config(spec, d, r_tx, t_end)
                sweep = run_sweep(base, spec.angles_deg)
                record["failed_angles"] = {str(a): msg for a, msg in sweep.failures.items()}
                if not sweep.histograms:
                    record["error"] = "all sweep angles failed"
                    continue

                tag = _grid_tag(d, r_tx)
                hist_path = os.path.join(out_dir, f"histograms_{tag}.{ext}")
                hist_rows = []
                for alpha in sorted(sweep.histograms):
                    h = sweep.histograms[alpha]
                    for b in range(h.counts.size):
                        hist_rows.append(
                            (
                                _fmt(alpha),
                                _fmt(h.bin_edges[b]),
                                _fmt(h.bin_edges[b + 1]),
                                int(h.counts[b]),
                            )
                        )
                write_table(hist_path, HISTOGRAM_HEADER, hist_rows)
                record["files"]["histograms"] = os.path.basename(hist_path)

                pattern = pattern_from_sweep(sweep.histograms, t_s, reference)
                gains = directivity_gain(pattern)
                peaks = {
                    alpha: histogram_peak_time(h, spec.smoothing_window)
                    for alpha, h in sorted(sweep.histograms.items())
                    if h.total_absorbed > 0
                }
                record["gain_by_angle"] = {str(a): g for a, g in gains.items()}
                record["peak_time_by_angle"] = {str(a): t for a, t in peaks.items()}
                record["counts_at_ts_by_angle"] = {
                    str(float(a)): float(c)
                    for a, c in zip(pattern.angles_deg, pattern.counts_at_ts)
                }
                try:
                    record["hppw_deg"] = half_power_width(pattern)
                except MetricsError as exc:
                    record["error"] = f"hppw undefined: {exc}"

                pattern_path = os.path.join(out_dir, f"pattern_{tag}.{ext}")
                pattern_rows = [
                    (
                        _fmt(alpha),
                        _fmt(counts),
                        _fmt(gains[float(alpha)]),
                        _fmt(peaks.get(float(alpha), math.nan)),
                    )
                    for alpha, counts in zip(pattern.angles_deg, pattern.counts_at_ts)
                ]
                write_table(pattern_path, PATTERN_HEADER, pattern_rows)
                record["files"]["pattern"] = os.path.basename(pattern_path)
            except (SimulationConfigError, TopologyError, MetricsError, ValueError) as exc:
                record["error"] = str(exc)

    validation = None
    if validate_points:
        validation = [
            validate_point_source(
                d=d,
                n_molecules=spec.n_molecules,
                diffusion=spec.diffusion,
                r_rx=spec.r_rx,
                dt=spec.dt,
                seed=spec.seed,
                absorption=spec.absorption,
            )
            for d in spec.d_values
        ]

    summary = {
        "config": _resolved_config(spec, out_dir, file_format),
        "metrics": metrics_records,
        "validation": validation,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return summary


def _base_config(spec: ExperimentSpec, d: float, r_tx: float, t_end: float) -> SimConfig:
    topology = measurement_topology(
        d=d, r_tx=r_tx, r_rx=spec.r_rx, alpha_deg=0.0, pivot=spec.pivot
    )
    return SimConfig(
        topology=topology,
        n_molecules=spec.n_molecules,
        diffusion=spec.diffusion,
        dt=spec.dt,
        t_end=t_end,
        seed=_grid_seed(spec.seed, d, r_tx),
        bin_width=spec.bin_width,
        absorption=spec.absorption,
    )


def _resolved_config(spec: ExperimentSpec, out_dir: str, file_format: str) -> dict:
    resolved = asdict(spec)
    resolved["t_end_values"] = [spec.t_end_for(d) for d in spec.d_values]
    resolved["bin_width_values"] = [
        spec.bin_width if spec.bin_width is not None else spec.t_end_for(d) / 1000.0
        for d in spec.d_values
    ]
    resolved["output_dir"] = out_dir
    resolved["format"] = file_format
    resolved["placement_pivot"] = spec.pivot
    return resolved


def validate_point_source(
    d: float = 2.0,
    n_molecules: int = DEFAULT_N,
    diffusion: float = DEFAULT_D_COEFF,
    r_rx: float = DEFAULT_R_RX,
    dt: float = DEFAULT_DT,
    seed: int = DEFAULT_SEED,
    t_end: float | None = None,
    n_checkpoints: int = 20,
    absorption: str = ABSORPTION_BRIDGE,
    analytic_params: ChannelParams | None = None,
) -> dict:
    """Compare a point-source run against the closed-form channel.

    Checks the empirical cumulative hit fraction at ``n_checkpoints`` evenly
    spaced times against the 4-sigma binomial bound
    ``4 * sqrt(p * (1 - p) / N)`` and reports the worst deviation.
    ``analytic_params`` substitutes a different closed-form channel, e.g. as
    a deliberately mismatched negative control.
    """
    t_end = d * d * T_END_PER_DISTANCE if t_end is None else t_end
    topology = measurement_topology(d=d, r_tx=0.0, r_rx=r_rx, alpha_deg=0.0)
    config = SimConfig(
        topology=topology,
        n_molecules=n_molecules,
        diffusion=diffusion,
        dt=dt,
        t_end=t_end,
        seed=seed,
        bin_width=t_end / n_checkpoints,
        absorption=absorption,
    )
    started = time.time()
    histogram = run_single(config)
    runtime = time.time() - started
    channel = analytic_params or ChannelParams(diffusion, d, r_rx)
    checkpoints = []
    worst = 0.0
    passed = True
    for k in range(1, n_checkpoints + 1):
        t = k * t_end / n_checkpoints
        empirical = counts_until(histogram, t) / n_molecules
        analytic = float(hit_fraction(channel, t))
        bound = 4.0 * math.sqrt(analytic * (1.0 - analytic) / n_molecules)
        deviation = empirical - analytic
        ok = abs(deviation) <= bound
        passed &= ok
        worst = max(worst, abs(deviation))
        checkpoints.append(
            {
                "t": t,
                "empirical": empirical,
                "analytic": analytic,
                "deviation": deviation,
                "bound_4sigma": bound,
                "pass": ok,
            }
        )
    return {
        "d": d,
        "n_molecules": n_molecules,
        "diffusion": diffusion,
        "r_rx": r_rx,
        "dt": dt,
        "seed": seed,
        "t_end": t_end,
        "absorption": absorption,
        "max_abs_deviation": worst,
        "runtime_s": runtime,
        "pass": passed,
        "checkpoints": checkpoints,
    }
