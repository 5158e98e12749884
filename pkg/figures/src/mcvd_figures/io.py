"""Strict readers for the simulator's result files.

Nonconforming input is a hard :class:`SchemaError`, never silently coerced.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

PATTERN_COLUMNS = ["angle_deg", "counts_at_ts", "gain", "peak_time_s"]


class SchemaError(ValueError):
    """Input file does not conform to the published result schema."""


@dataclass(frozen=True)
class PatternTable:
    """One grid point's per-angle pattern data."""

    d: float
    r_tx: float
    t_s: float
    angles_deg: np.ndarray
    counts_at_ts: np.ndarray
    gain: np.ndarray
    peak_time_s: np.ndarray
    hppw_deg: float | None
    point_reference: float

    @property
    def label(self) -> str:
        return f"d={self.d:g} µm, r_tx={self.r_tx:g} µm"


def _read_pattern_rows(path: str) -> list[dict]:
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            rows = json.load(fh)
        if not isinstance(rows, list):
            raise SchemaError(f"{path}: expected a JSON array of row records")
        for row in rows:
            if sorted(row) != sorted(PATTERN_COLUMNS):
                raise SchemaError(f"{path}: row keys {sorted(row)} != {PATTERN_COLUMNS}")
        return rows
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PATTERN_COLUMNS:
            raise SchemaError(f"{path}: header {header} != {PATTERN_COLUMNS}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(PATTERN_COLUMNS):
                raise SchemaError(f"{path}:{lineno}: expected {len(PATTERN_COLUMNS)} columns")
            rows.append(dict(zip(PATTERN_COLUMNS, row)))
    return rows


def load_summary(results_dir: str) -> dict:
    path = os.path.join(results_dir, "summary.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("config", "metrics", "version"):
        if key not in summary:
            raise SchemaError(f"{path}: missing required key {key!r}")
    return summary


def load_patterns(results_dir: str) -> list[PatternTable]:
    """All successfully computed grid points of one result directory."""
    summary = load_summary(results_dir)
    tables = []
    for record in summary["metrics"]:
        pattern_file = record.get("files", {}).get("pattern")
        if record.get("error") or not pattern_file:
            continue
        rows = _read_pattern_rows(os.path.join(results_dir, pattern_file))
        try:
            angles = np.array([float(r["angle_deg"]) for r in rows])
            counts = np.array([float(r["counts_at_ts"]) for r in rows])
            gain = np.array([float(r["gain"]) for r in rows])
            peaks = np.array([float(r["peak_time_s"]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{pattern_file}: non-numeric cell: {exc}") from exc
        if angles.size == 0:
            raise SchemaError(f"{pattern_file}: no data rows")
        if np.any(np.diff(angles) <= 0):
            raise SchemaError(f"{pattern_file}: angles must be strictly increasing")
        tables.append(
            PatternTable(
                d=float(record["d"]),
                r_tx=float(record["r_tx"]),
                t_s=float(record["t_s"]),
                angles_deg=angles,
                counts_at_ts=counts,
                gain=gain,
                peak_time_s=peaks,
                hppw_deg=record.get("hppw_deg"),
                point_reference=float(record["point_reference_counts"]),
            )
        )
    return tables


def load_hppw_records(results_dir: str) -> list[dict]:
    """(d, r_tx, hppw) rows for every grid point that has a defined HPPW."""
    summary = load_summary(results_dir)
    rows = []
    for record in summary["metrics"]:
        if record.get("error") or record.get("hppw_deg") is None:
            continue
        rows.append(
            {
                "d": float(record["d"]),
                "r_tx": float(record["r_tx"]),
                "hppw_deg": float(record["hppw_deg"]),
            }
        )
    return rows


def finite(values: np.ndarray) -> np.ndarray:
    return np.array([v for v in values if math.isfinite(v)])
