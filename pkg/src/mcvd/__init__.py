"""Molecular communication via diffusion: particle simulator, closed-form
point-source channel, and angular pattern metrics."""

__version__ = "0.1.0"

from .channel import ChannelParams, expected_hits, hit_fraction, hit_rate, peak_time
from .geometry import (
    Sphere,
    Topology,
    TopologyError,
    Vector3,
    measurement_topology,
    place_receiver,
    place_transmitter,
    reflect_off_sphere,
)
from .metrics import (
    NO_CROSSING_HPPW,
    AngularPattern,
    MetricsError,
    counts_until,
    directivity_gain,
    half_power_width,
    histogram_peak_time,
    pattern_from_sweep,
)
from .sim import (
    HittingHistogram,
    SimConfig,
    SimulationConfigError,
    SweepResult,
    brownian_step,
    run_single,
    run_sweep,
)

__all__ = [
    "AngularPattern",
    "ChannelParams",
    "HittingHistogram",
    "MetricsError",
    "NO_CROSSING_HPPW",
    "SimConfig",
    "SimulationConfigError",
    "Sphere",
    "SweepResult",
    "Topology",
    "TopologyError",
    "Vector3",
    "brownian_step",
    "counts_until",
    "directivity_gain",
    "expected_hits",
    "half_power_width",
    "histogram_peak_time",
    "hit_fraction",
    "hit_rate",
    "measurement_topology",
    "pattern_from_sweep",
    "peak_time",
    "place_receiver",
    "place_transmitter",
    "reflect_off_sphere",
    "run_single",
    "run_sweep",
]
