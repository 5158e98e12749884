"""Command line interface.

Subcommands:
  run <spec-file-or-preset>   run an experiment grid and write CSV/JSON
  validate                    point-source simulation vs the closed form
  metrics <result-dir>        recompute pattern metrics from stored histograms

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 I/O error.  Errors are reported as one JSON record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .experiment import (
    PRESET_NAMES,
    ConfigError,
    ValidationFailure,
    parse_spec_file,
    preset,
    run_experiment,
    validate_point_source,
)
from .metrics import (
    MetricsError,
    directivity_gain,
    half_power_width,
    histogram_peak_time,
    pattern_from_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    # argparse.SUPPRESS keeps subcommand-level flags from clobbering
    # values given before the subcommand
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the experiment seed")
    parser.add_argument("--dt", type=float, default=argparse.SUPPRESS,
                        help="override the Brownian step length (s)")
    parser.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker thread count for the particle kernel")
    parser.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                        help="histogram/pattern table format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcvd",
        description="Diffusion-based molecular communication simulator and "
        "pattern analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec or preset")
    p_run.add_argument("spec", help=f"spec file path or preset name ({', '.join(PRESET_NAMES)})")
    p_run.add_argument("--n-molecules", type=int, default=None,
                       help="override emitted molecule count")
    p_run.add_argument("--t-end", type=float, default=None,
                       help="override simulation duration for every distance (s)")
    p_run.add_argument("--simulated-reference", action="store_true", default=None,
                       help="use a simulated point-source gain reference instead "
                       "of the analytic expectation")
    p_run.add_argument("--validate", action="store_true",
                       help="also run the point-source validation per distance")
    _common_flags(p_run)

    p_val = sub.add_parser("validate", help="point-source check against the closed form")
    p_val.add_argument("--d", type=float, default=2.0, help="emission-to-surface distance (µm)")
    p_val.add_argument("--N", type=int, default=40000, help="emitted molecule count")
    p_val.add_argument("--D", type=float, default=100.0, help="diffusion coefficient (µm²/s)")
    p_val.add_argument("--r-rx", type=float, default=5.0, help="receiver radius (µm)")
    _common_flags(p_val)

    p_met = sub.add_parser("metrics", help="recompute metrics from stored histograms")
    p_met.add_argument("results", help="directory containing summary.json and histogram CSVs")
    p_met.add_argument("--t-s", type=float, default=None, help="override the symbol time (s)")
    p_met.add_argument("--smoothing-window", type=int, default=None,
                       help="override the peak-time smoothing window (odd bin count)")
    _common_flags(p_met)
    return parser


def _error(kind: str, message: str, code: int) -> int:
    json.dump({"error": {"type": kind, "message": message}}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _apply_threads(args) -> None:
    threads = getattr(args, "threads", None)
    if threads:
        import numba

        numba.set_num_threads(threads)


def _cmd_run(args) -> int:
    if os.path.exists(args.spec):
        spec = parse_spec_file(args.spec)
    elif args.spec in PRESET_NAMES:
        spec = preset(args.spec)
    else:
        raise ConfigError(f"{args.spec!r} is neither a spec file nor a preset name")
    if getattr(args, "seed", None) is not None:
        spec.seed = args.seed
    if getattr(args, "dt", None) is not None:
        spec.dt = args.dt
    if args.n_molecules is not None:
        spec.n_molecules = args.n_molecules
    if args.t_end is not None:
        spec.t_end_values = [args.t_end] * len(spec.d_values)
    if args.simulated_reference:
        spec.simulated_reference = True
    summary = run_experiment(
        spec,
        output_dir=getattr(args, "out", None),
        file_format=getattr(args, "format", "csv"),
        validate_points=args.validate,
    )
    failed = [m for m in summary["metrics"] if m["error"]]
    print(
        f"{spec.name}: {len(summary['metrics']) - len(failed)}/{len(summary['metrics'])} "
        f"grid points completed -> {summary['config']['output_dir']}"
    )
    if args.validate and summary["validation"] is not None:
        for report in summary["validation"]:
            status = "PASS" if report["pass"] else "FAIL"
            print(
                f"validate d={report['d']:g}: {status} "
                f"(max deviation {report['max_abs_deviation']:.5f})"
            )
        if not all(r["pass"] for r in summary["validation"]):
            raise ValidationFailure("point-source validation failed")
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = validate_point_source(
        d=args.d,
        n_molecules=args.N,
        diffusion=args.D,
        r_rx=args.r_rx,
        dt=getattr(args, "dt", 1e-4),
        seed=getattr(args, "seed", 1202),
    )
    out_dir = getattr(args, "out", None)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"validation_d{args.d:g}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
            fh.write("\n")
    status = "PASS" if report["pass"] else "FAIL"
    print(
        f"point-source validation d={args.d:g}: {status} "
        f"(max deviation {report['max_abs_deviation']:.5f}, "
        f"runtime {report['runtime_s']:.1f}s)"
    )
    if not report["pass"]:
        raise ValidationFailure("deviation exceeded the 4-sigma binomial bound")
    return EXIT_OK


def _load_histograms(path: str) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Histogram CSV -> {angle: (edges, counts)}; validates the schema."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["angle_deg", "bin_start_s", "bin_end_s", "count"]:
            raise ConfigError(f"{path}: unexpected histogram header {header}")
        per_angle: dict[float, list[tuple[float, float, int]]] = {}
        for row in reader:
            alpha, start, end, count = float(row[0]), float(row[1]), float(row[2]), int(row[3])
            per_angle.setdefault(alpha, []).append((start, end, count))
    out = {}
    for alpha, rows in per_angle.items():
        rows.sort()
        edges = np.array([r[0] for r in rows] + [rows[-1][1]])
        counts = np.array([r[2] for r in rows], dtype=np.int64)
        out[alpha] = (edges, counts)
    return out


def _cmd_metrics(args) -> int:
    from .sim import HittingHistogram

    summary_path = os.path.join(args.results, "summary.json")
    try:
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {summary_path}: {exc}") from exc
    window = args.smoothing_window or summary["config"].get(
        "smoothing_window", 11
    )
    recomputed = []
    for record in summary["metrics"]:
        if record.get("error") or "histograms" not in record.get("files", {}):
            continue
        hist_path = os.path.join(args.results, record["files"]["histograms"])
        histograms = {}
        for alpha, (edges, counts) in _load_histograms(hist_path).items():
            histograms[alpha] = HittingHistogram(
                bin_edges=edges,
                counts=counts,
                total_emitted=summary["config"]["n_molecules"],
                total_absorbed=int(counts.sum()),
                t_end=float(edges[-1]),
                config_digest="recomputed",
            )
        t_s = args.t_s if args.t_s is not None else record["t_s"]
        pattern = pattern_from_sweep(histograms, t_s, record["point_reference_counts"])
        entry = {
            "d": record["d"],
            "r_tx": record["r_tx"],
            "t_s": t_s,
            "smoothing_window": window,
            "hppw_deg": half_power_width(pattern),
            "gain_by_angle": {str(a): g for a, g in directivity_gain(pattern).items()},
            "peak_time_by_angle": {
                str(a): histogram_peak_time(h, window)
                for a, h in sorted(histograms.items())
                if h.total_absorbed > 0
            },
        }
        recomputed.append(entry)
    out_dir = getattr(args, "out", None) or args.results
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "metrics_recomputed.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(recomputed, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"recomputed metrics for {len(recomputed)} grid points -> {out_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except MetricsError as exc:
        return _error("metrics", str(exc), EXIT_CONFIG)
    except ValidationFailure as exc:
        return _error("validation", str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
