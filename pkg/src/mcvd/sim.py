"""Particle-based Brownian dynamics engine.

``run_single`` releases N molecules from the emission point at t = 0 and
advances each with independent Gaussian steps of per-axis standard deviation
``sqrt(2 * D * dt)``.  After every step the transmitter reflection rule is
applied first (the reflected point is the physical end-of-step position),
then the absorption test.  Each molecule contributes at most one absorption;
survivors are discarded at ``t_end`` and only the hitting-time histogram is
returned.

Two absorption detection modes exist.  ``"bridge"`` (default) treats the
receiver as absorbing along the whole step: besides end-of-step containment
it absorbs with the Brownian-bridge contact probability
``exp(-h1*h2 / (D*dt))`` where h1, h2 are the endpoint distances from the
receiver surface.  ``"endpoint"`` tests end-of-step containment only; it
underestimates absorption by O(sqrt(D*dt)) near the boundary and is kept for
comparison studies.  Both record the end-of-step time as the absorption
time.

Molecules are embarrassingly parallel: the compiled kernel iterates them
with ``prange`` and each writes only its own absorption slot, so histograms
are bit-identical for a fixed seed regardless of thread count.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .geometry import Topology, Vector3, measurement_topology, reflect_off_sphere
from .rng import as_u64, derive_substream_seed, gauss3, next_u64, stream_state

DEFAULT_BINS = 1000

ABSORPTION_BRIDGE = "bridge"
ABSORPTION_ENDPOINT = "endpoint"

# RMS per-axis step above this fraction of the smallest geometric scale
# risks boundary-skipping artifacts (warning only).
_STEP_SCALE_LIMIT = 0.1

# Skip the bridge draw when exp(-h1*h2/(D*dt)) < exp(-BRIDGE_CUTOFF) ~ 1e-14.
BRIDGE_CUTOFF = 32.0

_INV_2_53 = 1.0 / 9007199254740992.0


class SimulationConfigError(ValueError):
    """Invalid simulation configuration (bad topology or parameters)."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run.

    Units: µm, µm²/s, seconds.  ``bin_width`` defaults to ``t_end / 1000``;
    when ``t_end`` is not an integer multiple of it, the final bin is padded
    past ``t_end``.
    """

    topology: Topology
    n_molecules: int
    diffusion: float
    dt: float
    t_end: float
    seed: int = 0
    bin_width: float | None = None
    absorption: str = ABSORPTION_BRIDGE

    def __post_init__(self):
        if self.absorption not in (ABSORPTION_BRIDGE, ABSORPTION_ENDPOINT):
            raise SimulationConfigError(f"unknown absorption mode {self.absorption!r}")
        if self.n_molecules < 1:
            raise SimulationConfigError(f"n_molecules must be >= 1, got {self.n_molecules}")
        if not (math.isfinite(self.diffusion) and self.diffusion > 0.0):
            raise SimulationConfigError(f"diffusion must be > 0, got {self.diffusion}")
        if not (0.0 < self.dt <= self.t_end):
            raise SimulationConfigError(
                f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}"
            )
        if self.effective_bin_width <= 0.0:
            raise SimulationConfigError(f"bin_width must be > 0, got {self.bin_width}")
        rms_step = math.sqrt(2.0 * self.diffusion * self.dt)
        scale = min(self.topology.rx.radius, self.topology.gap)
        if rms_step > _STEP_SCALE_LIMIT * scale:
            warnings.warn(
                f"RMS step {rms_step:.4g} µm exceeds {_STEP_SCALE_LIMIT:g} of the smallest "
                f"geometric scale {scale:.4g} µm; absorption may be underestimated",
                stacklevel=2,
            )

    @property
    def effective_bin_width(self) -> float:
        return self.t_end / DEFAULT_BINS if self.bin_width is None else self.bin_width

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def n_bins(self) -> int:
        # round-half-up against float noise, then pad any remainder bin
        ratio = self.t_end / self.effective_bin_width
        return max(1, int(math.ceil(ratio - 1e-9)))

    def digest(self) -> str:
        topo = self.topology
        parts = (
            f"N={self.n_molecules};D={self.diffusion!r};dt={self.dt!r};"
            f"t_end={self.t_end!r};seed={self.seed};bw={self.effective_bin_width!r};"
            f"em={topo.emission_point.as_array().tolist()!r};"
            f"tx={topo.tx_body.center.as_array().tolist()!r},{topo.tx_body.radius!r};"
            f"rx={topo.rx.center.as_array().tolist()!r},{topo.rx.radius!r};"
            f"pivot={topo.pivot};absorption={self.absorption}"
        )
        return hashlib.sha256(parts.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class HittingHistogram:
    """Absorption-time histogram of one run (the received signal)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total_emitted: int
    total_absorbed: int
    t_end: float
    config_digest: str

    def __post_init__(self):
        self.bin_edges.setflags(write=False)
        self.counts.setflags(write=False)
        if int(self.counts.sum()) != self.total_absorbed:
            raise ValueError("histogram counts do not sum to total_absorbed")
        if self.total_absorbed > self.total_emitted:
            raise ValueError("absorbed more molecules than were emitted")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def brownian_step(pos: Vector3, diffusion: float, dt: float, stream) -> Vector3:
    """One free-diffusion step: pos plus N(0, 2*D*dt) on each axis.

    ``stream`` is a :class:`~mcvd.rng.GaussianStream`; it advances exactly
    one step worth of draws, matching the compiled kernel's consumption.
    """
    if dt <= 0.0 or diffusion <= 0.0:
        raise ValueError("diffusion and dt must be > 0")
    sigma = math.sqrt(2.0 * diffusion * dt)
    g0, g1, g2 = stream.normals3()
    return Vector3(pos.x + sigma * g0, pos.y + sigma * g1, pos.z + sigma * g2)


@njit(parallel=True, cache=True, fastmath=True)
def _absorption_steps(
    seed, n_molecules, n_steps, sigma, use_bridge,
    ex, ey, ez, tcx, tcy, tcz, r_tx, rcx, rcy, rcz, r_rx, out,
):
    """Per-molecule first-absorption step index (1-based; 0 = survived)."""
    r_tx2 = r_tx * r_tx
    r_rx2 = r_rx * r_rx
    diff_dt = 0.5 * sigma * sigma  # D * dt
    h_start = math.sqrt((ex - rcx) ** 2 + (ey - rcy) ** 2 + (ez - rcz) ** 2) - r_rx
    for i in prange(n_molecules):
        state = stream_state(seed, np.uint64(i))
        x, y, z = ex, ey, ez
        h_prev = h_start
        hit = 0
        for k in range(n_steps):
            state, g0, g1, g2 = gauss3(state)
            px = x + sigma * g0
            py = y + sigma * g1
            pz = z + sigma * g2
            if r_tx > 0.0:
                ddx = px - tcx
                ddy = py - tcy
                ddz = pz - tcz
                d2 = ddx * ddx + ddy * ddy + ddz * ddz
                if d2 < r_tx2:
                    dist = math.sqrt(d2)
                    if dist < 1e-12:
                        px, py, pz = x, y, z  # degenerate center hit: roll back
                    else:
                        s = (2.0 * r_tx - dist) / dist
                        qx = tcx + ddx * s
                        qy = tcy + ddy * s
                        qz = tcz + ddz * s
                        q2 = (qx - tcx) ** 2 + (qy - tcy) ** 2 + (qz - tcz) ** 2
                        if q2 < r_tx2:  # fp edge case: roll back
                            px, py, pz = x, y, z
                        else:
                            px, py, pz = qx, qy, qz
            x, y, z = px, py, pz
            rdx = x - rcx
            rdy = y - rcy
            rdz = z - rcz
            rd2 = rdx * rdx + rdy * rdy + rdz * rdz
            if rd2 <= r_rx2:
                hit = k + 1
                break
            h_new = math.sqrt(rd2) - r_rx
            if use_bridge:
                hh = h_prev * h_new
                if hh < BRIDGE_CUTOFF * diff_dt:
                    state, w = next_u64(state)
                    u = (w >> np.uint64(11)) * _INV_2_53
                    if u < math.exp(-hh / diff_dt):
                        hit = k + 1
                        break
            h_prev = h_new
        out[i] = hit


def absorption_step_indices(config: SimConfig) -> np.ndarray:
    """Raw kernel output: per-molecule absorption step (1-based, 0=survived)."""
    config.topology.validate()
    topo = config.topology
    sigma = math.sqrt(2.0 * config.diffusion * config.dt)
    out = np.zeros(config.n_molecules, dtype=np.int64)
    em = topo.emission_point
    tc = topo.tx_body.center
    rc = topo.rx.center
    _absorption_steps(
        as_u64(config.seed), config.n_molecules, config.n_steps, sigma,
        config.absorption == ABSORPTION_BRIDGE,
        em.x, em.y, em.z, tc.x, tc.y, tc.z, topo.tx_body.radius,
        rc.x, rc.y, rc.z, topo.rx.radius, out,
    )
    return out


def run_single(config: SimConfig) -> HittingHistogram:
    """Simulate one configuration and return its hitting histogram."""
    steps = absorption_step_indices(config)
    absorbed_steps = steps[steps > 0]
    survivors = int((steps == 0).sum())
    total_absorbed = int(absorbed_steps.size)
    # conservation is structural, but assert it: every molecule is either
    # absorbed exactly once or survives to t_end
    assert total_absorbed + survivors == config.n_molecules

    n_bins = config.n_bins
    bw = config.effective_bin_width
    edges = np.arange(n_bins + 1, dtype=float) * bw
    times = absorbed_steps.astype(float) * config.dt
    idx = np.minimum((times / bw).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return HittingHistogram(
        bin_edges=edges,
        counts=counts,
        total_emitted=config.n_molecules,
        total_absorbed=total_absorbed,
        t_end=config.t_end,
        config_digest=config.digest(),
    )


@dataclass
class SweepResult:
    """Per-angle histograms of one angular sweep, plus isolated failures."""

    histograms: dict[float, HittingHistogram] = field(default_factory=dict)
    failures: dict[float, str] = field(default_factory=dict)


def sweep_config(base: SimConfig, alpha_deg: float) -> SimConfig:
    """Rebuild ``base`` for a new sweep angle with a derived sub-seed."""
    topo = base.topology
    new_topo = measurement_topology(
        d=topo.gap,
        r_tx=topo.tx_body.radius,
        r_rx=topo.rx.radius,
        alpha_deg=alpha_deg,
        emission_point=topo.emission_point,
        boresight=topo.boresight_axis,
        pivot=topo.pivot,
    )
    sub_seed = derive_substream_seed(base.seed, int(round(alpha_deg * 1e6)))
    return SimConfig(
        topology=new_topo,
        n_molecules=base.n_molecules,
        diffusion=base.diffusion,
        dt=base.dt,
        t_end=base.t_end,
        seed=sub_seed,
        bin_width=base.bin_width,
        absorption=base.absorption,
    )


def run_sweep(base: SimConfig, angles_deg) -> SweepResult:
    """Run ``base`` at each sweep angle; failed angles do not abort the rest."""
    result = SweepResult()
    for alpha in angles_deg:
        alpha = float(alpha)
        try:
            result.histograms[alpha] = run_single(sweep_config(base, alpha))
        except (SimulationConfigError, ValueError) as exc:
            result.failures[alpha] = str(exc)
    return result


def replay_molecule(config: SimConfig, index: int, positions: list | None = None) -> int:
    """Pure-Python replay of one molecule; returns its absorption step (0=survived).

    Uses the public geometry/stream primitives instead of the compiled
    kernel, so tests can cross-check both paths step for step.  When a list
    is passed as ``positions`` every end-of-step position is appended to it.
    """
    from .rng import GaussianStream

    topo = config.topology
    stream = GaussianStream(config.seed, index)
    pos = topo.emission_point
    diff_dt = config.diffusion * config.dt
    h_prev = pos.distance_to(topo.rx.center) - topo.rx.radius
    for k in range(config.n_steps):
        proposed = brownian_step(pos, config.diffusion, config.dt, stream)
        if topo.tx_body.radius > 0.0:
            proposed = reflect_off_sphere(pos, proposed, topo.tx_body)
        pos = proposed
        if positions is not None:
            positions.append(pos)
        h_new = pos.distance_to(topo.rx.center) - topo.rx.radius
        if h_new <= 0.0:
            return k + 1
        if config.absorption == ABSORPTION_BRIDGE:
            hh = h_prev * h_new
            if hh < BRIDGE_CUTOFF * diff_dt:
                if stream.uniform01() < math.exp(-hh / diff_dt):
                    return k + 1
        h_prev = h_new
    return 0
