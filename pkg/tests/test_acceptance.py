"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
line (run with ``pytest tests/test_acceptance.py -s`` to see them live).

Statistical criteria use the Table I parameter ranges.  Where the molecule
count is not pinned by a criterion, trend checks run at N=20000 to keep the
suite near 20 minutes on two cores; every tolerance scales with the N in
use.  Expected wall time is dominated by the d=6 gain sweeps.
"""

import math
import time

import numba
import numpy as np
import pytest

from mcvd.channel import ChannelParams, hit_fraction, peak_time
from mcvd.geometry import measurement_topology
from mcvd.metrics import (
    counts_until,
    half_power_width,
    histogram_peak_time,
    pattern_from_sweep,
)
from mcvd.sim import HittingHistogram, SimConfig, absorption_step_indices, replay_molecule, run_single, run_sweep
from mcvd.experiment import validate_point_source

SEED = 2016
ANGLES = [float(a) for a in range(0, 181, 10)]
DIFFUSION = 100.0
R_RX = 5.0
TABLE_D = (2.0, 4.0, 6.0)
SPHERICAL_R_TX = (2.5, 5.0, 7.5)
TREND_N = 20000  # criteria 3-5 (N not pinned there; tolerances scale with N)
FULL_N = 40000  # Table I count, pinned by the oracle-agreement criterion

_RESULTS = []


def report(name: str, passed: bool, detail: str) -> None:
    _RESULTS.append((name, passed))
    print(f"[ACCEPTANCE] {name}: {'PASS' if passed else 'FAIL'} — {detail}", flush=True)


@pytest.fixture(scope="session", autouse=True)
def kernel_warmup():
    topo = measurement_topology(d=2.0, r_tx=2.5, r_rx=R_RX, alpha_deg=0.0)
    run_single(SimConfig(topology=topo, n_molecules=8, diffusion=DIFFUSION,
                         dt=1e-4, t_end=0.001, seed=1))
    yield
    if _RESULTS:
        print("\n=== acceptance summary ===", flush=True)
        for name, passed in _RESULTS:
            print(f"  {'PASS' if passed else 'FAIL'}  {name}", flush=True)


def make_sweep(d, r_tx, t_end, n, seed, dt=1e-4, bin_width=None):
    topo = measurement_topology(d=d, r_tx=r_tx, r_rx=R_RX, alpha_deg=0.0)
    base = SimConfig(
        topology=topo, n_molecules=n, diffusion=DIFFUSION, dt=dt, t_end=t_end,
        seed=seed, bin_width=bin_width,
    )
    result = run_sweep(base, ANGLES)
    assert not result.failures, f"sweep failures: {result.failures}"
    return result


def count_sigma(count: float, n: int) -> float:
    p = min(max(count / n, 0.0), 1.0)
    return math.sqrt(n * p * (1.0 - p))


def hppw_with_sigma(pattern, n_emitted):
    """Half-power width and its 1-sigma from propagated binomial count noise."""
    angles = pattern.angles_deg
    counts = pattern.counts_at_ts
    half = 0.5 * counts[0]
    for i in range(1, angles.size):
        if counts[i] <= half:
            j = i - 1
            d_alpha = angles[i] - angles[j]
            dn = counts[j] - counts[i]
            d_half = -0.5 * d_alpha / dn
            d_upper = d_alpha * (half - counts[i]) / dn**2
            d_lower = d_alpha * (counts[j] - half) / dn**2
            if j == 0:  # boresight sample is also the crossing's upper sample
                partials = [(d_half + d_upper, counts[0]), (d_lower, counts[i])]
            else:
                partials = [(d_half, counts[0]), (d_upper, counts[j]), (d_lower, counts[i])]
            variance = sum((p * count_sigma(c, n_emitted)) ** 2 for p, c in partials)
            hppw = 2.0 * (angles[j] + (counts[j] - half) / dn * d_alpha)
            return hppw, math.sqrt(variance)
    return 360.0, math.inf


def bootstrap_peak_sigma(histogram, window, n_boot=40, seed=0):
    """Multinomial-resampling spread of the smoothed-argmax peak time."""
    rng = np.random.default_rng(seed)
    total = histogram.total_absorbed
    probs = histogram.counts / total
    peaks = np.empty(n_boot)
    for b in range(n_boot):
        resampled = rng.multinomial(total, probs).astype(np.int64)
        boot = HittingHistogram(
            bin_edges=histogram.bin_edges, counts=resampled, total_emitted=total,
            total_absorbed=total, t_end=histogram.t_end, config_digest="boot",
        )
        peaks[b] = histogram_peak_time(boot, window)
    return float(peaks.std())


# --------------------------------------------------------------------------
# criterion 1: analytic oracle agreement (point source vs closed form)
# --------------------------------------------------------------------------


def test_point_source_matches_closed_form_at_table_distances():
    all_pass = True
    details = []
    for d in TABLE_D:
        rep = validate_point_source(d=d, n_molecules=FULL_N, diffusion=DIFFUSION,
                                    r_rx=R_RX, dt=1e-4, seed=SEED)
        details.append(
            f"d={d:g}: max|dev|={rep['max_abs_deviation']:.5f} "
            f"(runtime {rep['runtime_s']:.0f}s)"
        )
        all_pass &= rep["pass"]
        # runtime target is < 60 s per configuration at desktop core counts;
        # allow 2x on this 2-core runner
        all_pass &= rep["runtime_s"] < 120.0
    report("analytic-oracle agreement (20 checkpoints, 4-sigma)", all_pass, "; ".join(details))
    assert all_pass


# --------------------------------------------------------------------------
# criterion 2: point-source peak time at d=4
# --------------------------------------------------------------------------


def test_point_source_peak_time_d4():
    # The raw argmax of a Table-I-sized histogram wanders several ms across
    # seeds (the hitting rate is flat within ~2 % for ms around its max), so
    # this measurement runs at a higher molecule count with a window wide
    # enough to bridge the plateau; both knobs are unpinned measurement
    # resolution and are reported below.
    d = 4.0
    t_end = 0.4  # captures the ~27 ms peak with 0.4 ms default bins
    n = 400000
    window = 31
    topo = measurement_topology(d=d, r_tx=0.0, r_rx=R_RX, alpha_deg=0.0)
    cfg = SimConfig(topology=topo, n_molecules=n, diffusion=DIFFUSION,
                    dt=1e-4, t_end=t_end, seed=SEED + 1)
    hist = run_single(cfg)
    measured = histogram_peak_time(hist, window)
    analytic = peak_time(ChannelParams(DIFFUSION, d, R_RX))
    tolerance = max(2.0 * hist.bin_width, 0.1 * analytic)
    ok = abs(measured - analytic) <= tolerance
    report(
        "point-source peak time (d=4)",
        ok,
        f"measured {measured*1e3:.2f} ms vs d^2/(6D) = {analytic*1e3:.2f} ms "
        f"(tolerance {tolerance*1e3:.2f} ms, N={n}, window={window})",
    )
    assert ok


# --------------------------------------------------------------------------
# criterion 3: HPPW strictly decreasing in transmitter radius
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def hppw_patterns():
    t_s = 0.2
    patterns = {}
    for d in TABLE_D:
        reference = TREND_N * hit_fraction(ChannelParams(DIFFUSION, d, R_RX), t_s)
        for r_tx in SPHERICAL_R_TX:
            sweep = make_sweep(d, r_tx, t_end=t_s, n=TREND_N,
                               seed=SEED + int(d * 100 + r_tx * 10))
            patterns[(d, r_tx)] = pattern_from_sweep(sweep.histograms, t_s, reference)
    return patterns


def test_hppw_decreases_with_transmitter_radius(hppw_patterns):
    all_pass = True
    details = []
    for d in TABLE_D:
        values = {}
        for r_tx in SPHERICAL_R_TX:
            hppw, sigma = hppw_with_sigma(hppw_patterns[(d, r_tx)], TREND_N)
            values[r_tx] = (hppw, sigma)
        ordered = True
        for small, large in ((2.5, 5.0), (5.0, 7.5)):
            gap = values[small][0] - values[large][0]
            ordered &= gap > 2.0 * math.hypot(values[small][1], values[large][1])
        all_pass &= ordered
        details.append(
            f"d={d:g}: " + " > ".join(f"{values[r][0]:.1f}±{2 * values[r][1]:.1f}"
                                      for r in SPHERICAL_R_TX)
        )
    report("HPPW strictly decreasing in r_tx (2-sigma gaps)", all_pass, "; ".join(details))
    assert all_pass


def test_hppw_matches_library_computation(hppw_patterns):
    for pattern in hppw_patterns.values():
        expected = half_power_width(pattern)
        computed, _ = hppw_with_sigma(pattern, TREND_N)
        assert computed == pytest.approx(expected)


# --------------------------------------------------------------------------
# criterion 4: directivity gain behavior at d=6
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def gain_data():
    d, t_s = 6.0, 1.8
    reference = TREND_N * hit_fraction(ChannelParams(DIFFUSION, d, R_RX), t_s)
    gains = {}
    sigmas = {}
    for r_tx in SPHERICAL_R_TX:
        sweep = make_sweep(d, r_tx, t_end=t_s, n=TREND_N, seed=SEED + int(r_tx * 100))
        pattern = pattern_from_sweep(sweep.histograms, t_s, reference)
        gains[r_tx] = dict(zip(pattern.angles_deg, pattern.counts_at_ts / reference))
        sigmas[r_tx] = {
            a: count_sigma(c, TREND_N) / reference
            for a, c in zip(pattern.angles_deg, pattern.counts_at_ts)
        }
    return gains, sigmas


def test_gain_behavior_d6(gain_data):
    gains, sigmas = gain_data
    problems = []

    # largest transmitter has the highest gain for well-aligned receivers
    for alpha in (0.0, 10.0, 20.0):
        for other in (2.5, 5.0):
            margin = gains[7.5][alpha] - gains[other][alpha]
            noise = 2.0 * math.hypot(sigmas[7.5][alpha], sigmas[other][alpha])
            if margin <= -noise:
                problems.append(f"gain(7.5)<{other} at {alpha:g} by {-margin:.3f}")

    # every transmitter radius leaks below unity gain at wide angles
    for r_tx in SPHERICAL_R_TX:
        below = [a for a, g in gains[r_tx].items() if g < 1.0 - 2.0 * sigmas[r_tx][a]]
        if not below:
            problems.append(f"gain never falls below 1 for r_tx={r_tx}")

    # steepest decay: smallest gain at every angle >= 120
    for alpha in (120.0, 130.0, 140.0, 150.0, 160.0, 170.0, 180.0):
        for other in (2.5, 5.0):
            margin = gains[other][alpha] - gains[7.5][alpha]
            noise = 2.0 * math.hypot(sigmas[7.5][alpha], sigmas[other][alpha])
            if margin <= -noise:
                problems.append(f"gain(7.5) not smallest at {alpha:g}")

    summary = (
        f"g(0): 7.5 -> {gains[7.5][0.0]:.2f}, 5 -> {gains[5.0][0.0]:.2f}, "
        f"2.5 -> {gains[2.5][0.0]:.2f}; g(180): {gains[7.5][180.0]:.2f}/"
        f"{gains[5.0][180.0]:.2f}/{gains[2.5][180.0]:.2f}"
    )
    ok = not problems
    report("directivity gain behavior (d=6, t_s=1.8)", ok,
           summary + ("" if ok else "; " + "; ".join(problems)))
    assert ok, problems


# --------------------------------------------------------------------------
# criterion 5: peak time vs angle at d=4
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def peak_sweeps():
    d, t_end = 4.0, 1.6
    sweeps = {}
    for r_tx in SPHERICAL_R_TX:
        sweeps[r_tx] = make_sweep(d, r_tx, t_end=t_end, n=TREND_N,
                                  seed=SEED + 7 + int(r_tx * 100))
    return sweeps


def test_peak_time_nondecreasing_in_angle(peak_sweeps):
    # wide-angle histograms are sparse; a wider (reported) smoothing window
    # stabilizes the argmax and the bootstrap supplies each angle's sigma
    window = 51
    all_pass = True
    details = []
    for r_tx, sweep in peak_sweeps.items():
        peaks = {}
        spreads = {}
        for alpha, hist in sweep.histograms.items():
            peaks[alpha] = histogram_peak_time(hist, window)
            spreads[alpha] = bootstrap_peak_sigma(hist, window, seed=int(alpha) + 1)
        violations = 0
        for lo, hi in zip(ANGLES, ANGLES[1:]):
            drop = peaks[lo] - peaks[hi]
            if drop > 2.0 * math.hypot(spreads[lo], spreads[hi]):
                violations += 1
        ok = violations <= 2 and peaks[180.0] > peaks[0.0]
        all_pass &= ok
        details.append(
            f"r_tx={r_tx:g}: {peaks[0.0]*1e3:.0f} -> {peaks[180.0]*1e3:.0f} ms, "
            f"{violations} significant decrease(s) [window={window}]"
        )
    report("peak time nondecreasing in angle (d=4)", all_pass, "; ".join(details))
    assert all_pass


def test_larger_transmitter_delays_wide_angle_peaks(peak_sweeps):
    window = 51
    mean_wide = {}
    for r_tx, sweep in peak_sweeps.items():
        wide = [histogram_peak_time(sweep.histograms[a], window)
                for a in ANGLES if a >= 120.0]
        mean_wide[r_tx] = float(np.mean(wide))
    ok = mean_wide[2.5] < mean_wide[5.0] < mean_wide[7.5]
    report(
        "larger r_tx delays the wide-angle peak (d=4, alpha >= 120)",
        ok,
        ", ".join(f"r_tx={r:g}: {mean_wide[r]*1e3:.0f} ms" for r in SPHERICAL_R_TX),
    )
    assert ok


# --------------------------------------------------------------------------
# criterion 6: conservation, containment, and determinism
# --------------------------------------------------------------------------


def test_conservation_containment_determinism():
    topo = measurement_topology(d=2.0, r_tx=7.5, r_rx=R_RX, alpha_deg=30.0)
    cfg = SimConfig(topology=topo, n_molecules=4000, diffusion=DIFFUSION,
                    dt=1e-4, t_end=0.1, seed=SEED + 11)
    steps = absorption_step_indices(cfg)
    conserved = int((steps > 0).sum()) + int((steps == 0).sum()) == cfg.n_molecules

    contained = True
    center = topo.tx_body.center
    for index in range(50):
        positions = []
        replay_molecule(cfg, index, positions=positions)
        contained &= all(p.distance_to(center) >= topo.tx_body.radius - 1e-9
                         for p in positions)

    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        h1 = run_single(cfg)
        numba.set_num_threads(2)
        h2 = run_single(cfg)
    finally:
        numba.set_num_threads(before)
    deterministic = np.array_equal(h1.counts, h2.counts)
    rerun = np.array_equal(run_single(cfg).counts, h2.counts)

    ok = conserved and contained and deterministic and rerun
    report(
        "conservation / containment / thread-count determinism",
        ok,
        f"conserved={conserved}, contained={contained}, "
        f"thread-invariant={deterministic}, rerun-identical={rerun}",
    )
    assert ok


# --------------------------------------------------------------------------
# criterion 7: dt robustness on the fig3 preset configurations
# --------------------------------------------------------------------------


def test_halving_dt_changes_absorption_less_than_noise():
    # boresight runs of the fig3 preset (d=2, t_end=0.4) per transmitter
    # radius, comparing each run's total absorbed fraction across dt
    d, t_end = 2.0, 0.4
    all_pass = True
    details = []
    for r_tx in (0.0,) + SPHERICAL_R_TX:
        topo = measurement_topology(d=d, r_tx=r_tx, r_rx=R_RX, alpha_deg=0.0)
        fractions = {}
        for dt in (1e-4, 5e-5):
            cfg = SimConfig(topology=topo, n_molecules=FULL_N, diffusion=DIFFUSION,
                            dt=dt, t_end=t_end, seed=SEED + 23)
            fractions[dt] = run_single(cfg).total_absorbed / FULL_N
        p_mean = 0.5 * (fractions[1e-4] + fractions[5e-5])
        sigma_diff = math.sqrt(2.0 * p_mean * (1.0 - p_mean) / FULL_N)
        delta = abs(fractions[1e-4] - fractions[5e-5])
        ok = delta < 2.0 * sigma_diff
        all_pass &= ok
        details.append(f"r_tx={r_tx:g}: |Δf|={delta:.5f} vs 2σ={2*sigma_diff:.5f}")
    report("dt halving within Monte Carlo noise (fig3 configs)", all_pass,
           "; ".join(details))
    assert all_pass
