"""Angular pattern metrics: counts at symbol time, half-power pattern width,
directivity gain, and per-angle histogram peak time.

All metrics operate on immutable :class:`~mcvd.sim.HittingHistogram` data or
on an :class:`AngularPattern` assembled from a sweep; nothing here touches
the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import HittingHistogram

# Sentinel HPPW when the pattern never drops to half its boresight value
# (e.g. the flat point-source pattern).
NO_CROSSING_HPPW = 360.0

DEFAULT_SMOOTHING_WINDOW = 11

_ALIGN_RTOL = 1e-9


class MetricsError(ValueError):
    """Raised when a metric is undefined for the given data."""


@dataclass(frozen=True)
class AngularPattern:
    """Per-angle received counts at one symbol time.

    ``point_reference`` is the angle-independent point-transmitter count used
    as the directivity-gain denominator.
    """

    angles_deg: np.ndarray
    counts_at_ts: np.ndarray
    t_s: float
    point_reference: float

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=float)
        counts = np.asarray(self.counts_at_ts, dtype=float)
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "counts_at_ts", counts)
        if angles.ndim != 1 or angles.shape != counts.shape:
            raise ValueError("angles and counts must be 1D arrays of equal length")
        if angles.size and np.any(np.diff(angles) <= 0.0):
            raise ValueError("angles must be strictly increasing")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0.0):
            raise ValueError("counts must be finite and >= 0")
        angles.setflags(write=False)
        counts.setflags(write=False)


def counts_until(histogram: HittingHistogram, t_s: float) -> float:
    """Absorbed count up to ``t_s``: full bins plus a linear share of the
    straddling bin.  Exact whenever ``t_s`` aligns with a bin edge."""
    if t_s < 0.0 or t_s > histogram.t_end * (1.0 + _ALIGN_RTOL):
        raise MetricsError(f"t_s={t_s} outside [0, {histogram.t_end}]")
    edges = histogram.bin_edges
    counts = histogram.counts
    tol = _ALIGN_RTOL * max(1.0, abs(t_s))
    total = float(counts[edges[1:] <= t_s + tol].sum())
    j = int(np.searchsorted(edges, t_s + tol) - 1)
    if 0 <= j < counts.size and edges[j + 1] > t_s + tol and t_s - edges[j] > tol:
        # the final bin may be padded past t_end; its data support ends there
        support_end = min(float(edges[j + 1]), histogram.t_end)
        total += float(counts[j]) * (t_s - edges[j]) / (support_end - edges[j])
    return total


def half_power_width(pattern: AngularPattern) -> float:
    """Half-power pattern width: twice the first angle at which the counts
    fall to half the boresight value (piecewise-linear between samples).

    Returns :data:`NO_CROSSING_HPPW` (360) when no sampled angle up to 180
    drops to half power.
    """
    angles = pattern.angles_deg
    counts = pattern.counts_at_ts
    if angles.size == 0 or abs(angles[0]) > 1e-9:
        raise MetricsError("pattern must include the boresight sample (alpha = 0)")
    if counts[0] <= 0.0:
        raise MetricsError("boresight count is zero; half-power width undefined")
    half = 0.5 * counts[0]
    for i in range(1, angles.size):
        if counts[i] <= half:
            lo, hi = counts[i - 1], counts[i]
            alpha = angles[i - 1] + (lo - half) / (lo - hi) * (angles[i] - angles[i - 1])
            return 2.0 * alpha
    return NO_CROSSING_HPPW


def directivity_gain(pattern: AngularPattern) -> dict[float, float]:
    """Per-angle ratio of received counts to the point-transmitter reference."""
    if pattern.point_reference <= 0.0:
        raise MetricsError("point reference must be > 0 for directivity gain")
    return {
        float(a): float(c) / pattern.point_reference
        for a, c in zip(pattern.angles_deg, pattern.counts_at_ts)
    }


def histogram_peak_time(
    histogram: HittingHistogram, smoothing_window: int = DEFAULT_SMOOTHING_WINDOW
) -> float:
    """Bin-center time of the (smoothed) histogram maximum.

    A centered moving average of ``smoothing_window`` bins (odd, >= 1,
    truncated at the edges) suppresses bin noise; ties break toward the
    earliest bin.
    """
    if smoothing_window < 1 or smoothing_window % 2 == 0:
        raise ValueError(f"smoothing_window must be odd and >= 1, got {smoothing_window}")
    if histogram.total_absorbed == 0:
        raise MetricsError("histogram has no absorptions; peak time undefined")
    counts = histogram.counts.astype(float)
    if smoothing_window == 1:
        smoothed = counts
    else:
        kernel = np.ones(smoothing_window)
        smoothed = np.convolve(counts, kernel, mode="same") / np.convolve(
            np.ones_like(counts), kernel, mode="same"
        )
    return float(histogram.bin_centers[int(np.argmax(smoothed))])


def pattern_from_sweep(
    histograms: dict[float, HittingHistogram], t_s: float, point_reference: float
) -> AngularPattern:
    """Assemble an :class:`AngularPattern` from per-angle sweep histograms."""
    angles = sorted(histograms)
    counts = [counts_until(histograms[a], t_s) for a in angles]
    return AngularPattern(
        angles_deg=np.array(angles, dtype=float),
        counts_at_ts=np.array(counts, dtype=float),
        t_s=t_s,
        point_reference=point_reference,
    )
