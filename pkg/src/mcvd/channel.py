"""Closed-form point-source absorption channel.

For a point emitter at surface distance ``d`` from a perfectly absorbing
sphere of radius ``r_rx`` in a medium with diffusion coefficient ``D``, the
fraction of emitted molecules absorbed by time ``t`` is

    hit_fraction(t) = r_rx / (d + r_rx) * erfc(d / sqrt(4 * D * t))

Its time derivative (the instantaneous hitting rate) peaks at
``d**2 / (6 * D)``, which is what :func:`peak_time` returns.

erfc is delegated to :func:`scipy.special.erfc`; the test suite pins its
accuracy against an independent series/continued-fraction oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc


@dataclass(frozen=True)
class ChannelParams:
    """Point-source channel parameters (µm²/s and µm)."""

    D: float
    d: float
    r_rx: float

    def __post_init__(self):
        for name in ("D", "d", "r_rx"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


def hit_fraction(params: ChannelParams, t):
    """Fraction of emitted molecules absorbed by time ``t`` (scalar or array).

    Returns 0 at t = 0; nondecreasing in t with supremum
    ``r_rx / (d + r_rx)``.  Raises for negative t.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    positive = t_arr > 0.0
    with np.errstate(divide="ignore"):
        arg = params.d / np.sqrt(4.0 * params.D * t_arr[positive])
    out[positive] = params.r_rx / (params.d + params.r_rx) * erfc(arg)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def hit_rate(params: ChannelParams, t):
    """Instantaneous hitting rate (1/s), the time derivative of hit_fraction.

    rate(t) = r_rx/(d+r_rx) * d / sqrt(4*pi*D*t**3) * exp(-d**2/(4*D*t))

    Defined for t > 0 only.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ValueError("t must be > 0")
    front = params.r_rx / (params.d + params.r_rx) * params.d
    out = front / np.sqrt(4.0 * np.pi * params.D * t_arr**3) * np.exp(
        -params.d**2 / (4.0 * params.D * t_arr)
    )
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def peak_time(params: ChannelParams) -> float:
    """Time at which the hitting rate is maximal: d**2 / (6 * D)."""
    return params.d**2 / (6.0 * params.D)


def expected_hits(params: ChannelParams, n_emitted: float, t):
    """Expected absorbed count for ``n_emitted`` molecules by time ``t``."""
    if n_emitted < 0:
        raise ValueError("n_emitted must be >= 0")
    return n_emitted * hit_fraction(params, t)
