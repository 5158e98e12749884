"""The four figure kinds produced from a result directory.

Data preparation is separated from drawing so the mirrored-trace and
idempotence guarantees can be tested without rasterizing anything.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import PatternTable, SchemaError, load_hppw_records, load_patterns


@dataclass
class FigureRequest:
    """One figure to render from one result directory."""

    kind: str  # polar_pattern | peak_time | hppw | gain
    results_dir: str
    output_path: str
    normalize: bool = False
    grid: bool = True
    title: str | None = None


@dataclass
class PolarTrace:
    label: str
    theta_deg: np.ndarray  # mirrored onto [-180, 180]
    values: np.ndarray
    hppw_deg: float | None


def mirror_pattern(angles_deg: np.ndarray, values: np.ndarray):
    """Duplicate the measured half-plane onto negative angles.

    The sweep is rotationally symmetric about boresight, so the plotted
    negative half is the exact mirror of the data, by construction.
    """
    theta = np.concatenate([-angles_deg[:0:-1], angles_deg])
    vals = np.concatenate([values[:0:-1], values])
    return theta, vals


def prepare_polar(tables: list[PatternTable], normalize: bool) -> list[PolarTrace]:
    if not tables:
        raise SchemaError("no pattern data to plot")
    scale = 1.0
    if normalize:
        scale = max(
            max(float(t.counts_at_ts.max()) for t in tables),
            max(t.point_reference for t in tables),
        )
        if scale <= 0:
            raise SchemaError("cannot normalize an all-zero pattern")
    traces = []
    for t in tables:
        theta, vals = mirror_pattern(t.angles_deg, t.counts_at_ts / scale)
        hppw = t.hppw_deg if t.hppw_deg is not None and t.hppw_deg < 360.0 else None
        traces.append(PolarTrace(t.label, theta, vals, hppw))
    return traces


def _reference_level(tables: list[PatternTable], normalize: bool) -> float:
    reference = tables[0].point_reference
    if normalize:
        scale = max(
            max(float(t.counts_at_ts.max()) for t in tables),
            max(t.point_reference for t in tables),
        )
        return reference / scale
    return reference


def render_polar_pattern(request: FigureRequest) -> str:
    tables = load_patterns(request.results_dir)
    traces = prepare_polar(tables, request.normalize)
    reference = _reference_level(tables, request.normalize)

    fig, ax = plt.subplots(subplot_kw={"projection": "polar"}, figsize=(6.4, 5.6))
    ax.set_theta_zero_location("E")
    for trace in traces:
        theta = np.radians(trace.theta_deg)
        (line,) = ax.plot(theta, trace.values, lw=1.4, label=trace.label)
        if trace.hppw_deg is not None:
            half = math.radians(trace.hppw_deg / 2.0)
            rmax = float(trace.values.max())
            for sign in (1.0, -1.0):
                ax.plot([sign * half, sign * half], [0.0, rmax],
                        color=line.get_color(), lw=0.7, ls=":", alpha=0.8)
    circle_theta = np.linspace(-math.pi, math.pi, 361)
    ax.plot(circle_theta, np.full_like(circle_theta, reference),
            color="0.3", ls="--", lw=1.0, label="point transmitter")
    unit = "normalized to max = 1" if request.normalize else "molecules"
    ax.set_title(request.title or f"Reception pattern at t_s ({unit})")
    ax.grid(request.grid, alpha=0.4)
    ax.legend(loc="lower left", bbox_to_anchor=(0.85, 0.9), fontsize=8)
    return _save(fig, request.output_path)


def render_peak_time(request: FigureRequest) -> str:
    tables = load_patterns(request.results_dir)
    if not tables:
        raise SchemaError("no pattern data to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for t in tables:
        mask = np.isfinite(t.peak_time_s)
        ax.plot(t.angles_deg[mask], t.peak_time_s[mask], marker="o", ms=3.5,
                lw=1.2, label=t.label)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("peak time (s)")
    ax.set_title(request.title or "Received-signal peak time vs angle")
    ax.grid(request.grid, alpha=0.4)
    ax.legend(fontsize=8)
    return _save(fig, request.output_path)


def render_hppw(request: FigureRequest) -> str:
    records = load_hppw_records(request.results_dir)
    if not records:
        raise SchemaError("no HPPW values to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    distances = sorted({r["d"] for r in records})
    for d in distances:
        rows = sorted((r for r in records if r["d"] == d), key=lambda r: r["r_tx"])
        ax.plot(
            [r["r_tx"] for r in rows],
            [r["hppw_deg"] for r in rows],
            marker="s", ms=4, lw=1.2, label=f"d={d:g} µm",
        )
    ax.set_xlabel("transmitter radius (µm)")
    ax.set_ylabel("half-power pattern width (deg)")
    ax.set_title(request.title or "HPPW vs transmitter radius")
    ax.grid(request.grid, alpha=0.4)
    ax.legend(fontsize=8)
    return _save(fig, request.output_path)


def render_gain(request: FigureRequest) -> str:
    tables = load_patterns(request.results_dir)
    if not tables:
        raise SchemaError("no pattern data to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for t in tables:
        ax.plot(t.angles_deg, t.gain, marker="o", ms=3.5, lw=1.2, label=t.label)
    ax.axhline(1.0, color="0.3", ls="--", lw=1.0, label="point transmitter")
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("directivity gain")
    ax.set_title(request.title or "Directivity gain vs angle")
    ax.grid(request.grid, alpha=0.4)
    ax.legend(fontsize=8)
    return _save(fig, request.output_path)


_RENDERERS = {
    "polar_pattern": render_polar_pattern,
    "peak_time": render_peak_time,
    "hppw": render_hppw,
    "gain": render_gain,
}


def render(request: FigureRequest) -> str:
    """Render one figure; returns the written path."""
    try:
        renderer = _RENDERERS[request.kind]
    except KeyError:
        raise SchemaError(
            f"unknown figure kind {request.kind!r}; expected one of {sorted(_RENDERERS)}"
        ) from None
    return renderer(request)


def _save(fig, output_path: str) -> str:
    out_dir = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(out_dir, exist_ok=True)
    fig.savefig(output_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return output_path
