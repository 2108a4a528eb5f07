"""Acceptance suite: one test per criterion, printing a PASS/FAIL line each.

Criteria 1-3 are CI-fast.  The remaining ones reproduce the full-scale
experiments (paper geometry, 192-tap estimates) and are marked ``slow``;
expect the complete suite to run for hours on a small machine.  Experiment
fixtures are shared across criteria so each configuration runs once.
"""

import sys
import time

import numpy as np
import pytest

from hrtfmeas.excitation import multichannel_pseq
from hrtfmeas.harness import ExperimentConfig, run_experiment
from hrtfmeas.metrics import average_system_distance, distance_series
from hrtfmeas.simulate import (LoudspeakerLayout, RotationTrajectory,
                               simulate_measurement)
from hrtfmeas.sysid import (StateSpaceParams, em_fit_segment, kalman_backward,
                            kalman_forward, log_likelihood, nlms_run)

from oracles import batch_posterior, joint_loglik, random_instance


def _report(criterion: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion}] {status} - {detail}",
          file=sys.__stdout__, flush=True)
    assert passed, f"criterion {criterion}: {detail}"


# -- criterion 1: oracle equivalence (fast) -----------------------------------

def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_mean = 0.0
    worst_ll = 0.0
    for _ in range(50):
        sources = int(rng.integers(1, 3))
        taps = int(rng.integers(1, 5 // sources))
        count = int(rng.integers(5, 51))
        params, excitation, y, regressors = random_instance(
            rng, sources=sources, taps=taps, count=count)
        fp = kalman_forward(params, excitation, y)
        sp = kalman_backward(params, fp, mode="full")
        mean, _ = batch_posterior(params, regressors, y)
        worst_mean = max(worst_mean, float(np.max(np.abs(sp.mu_hat - mean))))
        ll = log_likelihood(params, excitation, y)
        want = joint_loglik(params, regressors, y)
        worst_ll = max(worst_ll, abs(ll - want) / abs(want))
    elapsed = time.perf_counter() - t0
    _report(1, worst_mean <= 1e-8 and worst_ll <= 1e-8 and elapsed < 10.0,
            f"50 instances: max mean err {worst_mean:.2e}, "
            f"max loglik rel err {worst_ll:.2e}, {elapsed:.1f}s")


# -- criterion 2: EM monotonicity (fast) --------------------------------------

def test_criterion_2_em_monotonicity():
    rng = np.random.default_rng(777)
    t0 = time.perf_counter()
    worst_drop = 0.0
    for _ in range(20):
        sources = int(rng.integers(1, 3))
        taps = int(rng.integers(1, 9 // sources))
        count = int(rng.integers(50, 401))
        params, excitation, y, _ = random_instance(
            rng, sources=sources, taps=taps, count=count)
        init = StateSpaceParams.identity_init(params.dim, gamma_scale=1e-3,
                                              sigma=0.1)
        fit = em_fit_segment(excitation, y, (0, count), init, iterations=10)
        ll = np.asarray(fit.logliks)
        rel = np.diff(ll) / np.maximum(np.abs(ll[:-1]), 1.0)
        worst_drop = min(worst_drop, float(rel.min()))
    elapsed = time.perf_counter() - t0
    _report(2, worst_drop >= -1e-8 and elapsed < 30.0,
            f"20 segments x 10 iterations: worst relative step "
            f"{worst_drop:.2e}, {elapsed:.1f}s")


# -- criterion 3: PSEQ identifiability (fast) ---------------------------------

def test_criterion_3_pseq_identifiability():
    t0 = time.perf_counter()
    cfg = ExperimentConfig()  # paper geometry, L = 192
    taps, sources = cfg.taps, cfg.sources
    total = 4000
    warmup = 2 * sources * taps
    layout = cfg.resolved_layout()
    sphere = cfg.sphere_config()
    traj = RotationTrajectory(start_angle=0.0, velocity=0.0,
                              sample_rate=cfg.sample_rate)
    exc = multichannel_pseq(taps, sources, total, seed=5)

    results = {}
    for label, snr in (("noisy", 60.0), ("noiseless", None)):
        sim = simulate_measurement(layout, exc, traj, sphere, snr,
                                   noise_seed=9)
        est = nlms_run(exc.data, sim.y, taps, sources)
        series = distance_series(sim.references, est, start=warmup,
                                 with_tvi=False)
        results[label] = float(np.nanmax(series.d_db[warmup:]))
    elapsed = time.perf_counter() - t0
    _report(3, results["noisy"] <= -40.0 and results["noiseless"] <= -100.0
            and elapsed < 30.0,
            f"static sphere: worst post-convergence distance "
            f"{results['noisy']:.1f} dB noisy (limit -40), "
            f"{results['noiseless']:.1f} dB noiseless (limit -100), "
            f"{elapsed:.1f}s")


# -- shared full-scale experiments --------------------------------------------

@pytest.fixture(scope="session")
def exp180(tmp_path_factory):
    cfg = ExperimentConfig(
        velocities_deg_per_s=[180.0],
        methods=["nlms_wn", "nlms_pseq", "diag_kf", "proposed"],
        iterations=10, emit_figures=["fig3", "fig4"])
    out = tmp_path_factory.mktemp("exp180")
    return cfg, run_experiment(cfg, out, workers=2)


@pytest.fixture(scope="session")
def exp_sweep(tmp_path_factory):
    cfg = ExperimentConfig(
        velocities_deg_per_s=[360.0, 90.0, 45.0],
        methods=["nlms_pseq", "proposed"],
        iterations=10, emit_figures=["fig2", "fig4"])
    out = tmp_path_factory.mktemp("exp_sweep")
    return cfg, run_experiment(cfg, out, workers=2)


@pytest.fixture(scope="session")
def exp3ch(tmp_path_factory):
    cfg = ExperimentConfig(
        sources=3, velocities_deg_per_s=[90.0, 180.0],
        methods=["nlms_pseq", "proposed"],
        iterations=1, emit_figures=["fig5"])
    out = tmp_path_factory.mktemp("exp3ch")
    return cfg, run_experiment(cfg, out, workers=2)


# -- criterion 4: single-channel 180 deg/s reproduction -----------------------

@pytest.mark.slow
def test_criterion_4_fig3_reproduction(exp180):
    cfg, result = exp180
    prop = result.find_run("proposed", 180.0)
    nlms = result.find_run("nlms_pseq", 180.0)
    start = cfg.convergence_samples()
    delta = prop.series.d_db[start:, 0] - nlms.series.d_db[start:, 0]
    inside = np.mean((delta <= -15.0) & (delta >= -35.0))
    _report(4, inside >= 0.5,
            f"improvement within [15, 35] dB on {100 * inside:.1f}% of "
            f"post-convergence samples (need >= 50%); averages: proposed "
            f"{prop.d_avg_db:.1f} dB vs NLMS-PSEQ {nlms.d_avg_db:.1f} dB")


# -- criterion 5: velocity sweep trend ----------------------------------------

@pytest.mark.slow
def test_criterion_5_velocity_trend(exp180, exp_sweep):
    cfg180, result180 = exp180
    cfg, result = exp_sweep
    improvements = {}
    for velocity in (45.0, 90.0, 360.0):
        prop = result.find_run("proposed", velocity)
        nlms = result.find_run("nlms_pseq", velocity)
        improvements[velocity] = prop.d_avg_db - nlms.d_avg_db
    improvements[180.0] = (result180.find_run("proposed", 180.0).d_avg_db
                           - result180.find_run("nlms_pseq", 180.0).d_avg_db)
    in_band = all(-25.0 <= imp <= -5.0 for imp in improvements.values())
    best = min(improvements, key=improvements.get)
    detail = ", ".join(f"{v:g} deg/s: {improvements[v]:+.1f} dB"
                       for v in sorted(improvements))
    _report(5, in_band and best in (90.0, 180.0),
            f"{detail}; largest improvement at {best:g} deg/s "
            f"(band [-25, -5], peak at 90 or 180)")


# -- criterion 6: systematic-shift compensation -------------------------------

@pytest.mark.slow
def test_criterion_6_shift_compensation(exp180):
    cfg, result = exp180
    nlms = result.find_run("nlms_pseq", 180.0)
    reduction = nlms.d_avg_shifted_db - nlms.d_avg_db
    _report(6, -8.0 <= reduction <= -4.0,
            f"half-period shift changes the NLMS-PSEQ average by "
            f"{reduction:+.2f} dB (expected -6 +/- 2)")


# -- criterion 7: time-variance signature -------------------------------------

@pytest.mark.slow
def test_criterion_7_tvi_bright_spot(exp180):
    cfg, result = exp180
    run = result.find_run("nlms_pseq", 180.0)
    start = cfg.convergence_samples()
    tvi = run.series.tvi_db[start:, 0]
    minimum = float(np.nanmin(tvi))
    # localization: the deep-dip region must be one narrow angular window
    total = cfg.duration_for(180.0)
    traj_angles = np.arange(total - start) * 180.0 / cfg.sample_rate
    deep = np.nonzero(tvi < -60.0)[0]
    span = (traj_angles[deep.max()] - traj_angles[deep.min()]
            if deep.size else np.inf)
    _report(7, minimum < -60.0 and deep.size > 0 and span <= 20.0,
            f"TVI minimum {minimum:.1f} dB; sub-60 dB region spans "
            f"{span:.2f} degrees of rotation (localized bright spot)")


# -- criterion 8: three-channel preliminary -----------------------------------

@pytest.mark.slow
def test_criterion_8_three_channel(exp3ch):
    cfg, result = exp3ch
    improvements = {}
    for velocity in (90.0, 180.0):
        prop = result.find_run("proposed", velocity)
        nlms = result.find_run("nlms_pseq", velocity)
        improvements[velocity] = prop.d_avg_db - nlms.d_avg_db
    detail = ", ".join(f"{v:g} deg/s: {improvements[v]:+.1f} dB"
                       for v in sorted(improvements))
    _report(8, all(imp <= -5.0 for imp in improvements.values()),
            f"three channels, single iteration: {detail} (need <= -5 dB)")


# -- criterion 9: determinism -------------------------------------------------

@pytest.mark.slow
def test_criterion_9_determinism(exp180, tmp_path_factory):
    from pathlib import Path

    cfg, result = exp180
    repeat_dir = tmp_path_factory.mktemp("exp180_repeat")
    repeat = run_experiment(cfg, repeat_dir, workers=1)
    first = Path(result.summary_path).read_bytes()
    second = Path(repeat.summary_path).read_bytes()
    _report(9, first == second,
            f"summary.csv byte-identical across re-runs and worker counts "
            f"({len(first)} bytes)")


# -- supporting paper-anchored checks -----------------------------------------

@pytest.mark.slow
def test_diag_kalman_on_par_with_nlms(exp180):
    # fixed-transition Kalman baseline lands within 3 dB of NLMS-PSEQ
    cfg, result = exp180
    kf = result.find_run("diag_kf", 180.0)
    nlms = result.find_run("nlms_pseq", 180.0)
    assert abs(kf.d_avg_db - nlms.d_avg_db) <= 3.0, \
        f"diag KF {kf.d_avg_db:.1f} dB vs NLMS {nlms.d_avg_db:.1f} dB"


@pytest.mark.slow
def test_learned_transition_diagonally_dominant(exp_sweep):
    # structural check of the learned matrices (first segment, 360 deg/s)
    cfg, result = exp_sweep
    run = result.find_run("proposed", 360.0)
    a = run.segment_params[0].A
    dim = a.shape[0]
    diag = np.abs(np.diag(a)).mean()
    off = np.abs(a[~np.eye(dim, dtype=bool)]).mean()
    assert diag > off, f"mean |diag| {diag:.4f} <= mean |off| {off:.4f}"
