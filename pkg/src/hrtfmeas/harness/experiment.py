"""Experiment orchestration: simulate, identify, evaluate, persist.

One experiment sweeps (method, velocity) pairs.  Per velocity, a single
noisy measurement is simulated per excitation kind and shared by every
method so the comparison sees identical data.  Summary and per-sample CSV
files are byte-reproducible: all randomness is seeded from the config and
wall-clock timings go to a separate file.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ConfigError, OutputExistsError
from ..excitation import ExcitationSignal, gen_white_noise, multichannel_pseq
from ..io.archive import HrirSetArchive, decimate, write_archive
from ..io.wavio import write_wav
from ..metrics import DistanceSeries, average_system_distance, distance_series
from ..simulate import (RotationTrajectory, SimulationOutput, angle_at,
                        simulate_measurement, source_incidences)
from ..sphere import HRIR, HrirGrid, SphereConfig, synthesize_hrir
from ..sysid import (default_workers, diag_kalman_run, identify_proposed,
                     nlms_run, plan_segments)
from .config import METHOD_EXCITATION, ExperimentConfig, seeds_for


@dataclass
class MethodRun:
    """Scored identification of one method at one velocity.

    ``segment_params`` keeps only the first segment's learned parameters,
    which is what the matrix-structure figure consumes; retaining every
    segment's matrices would pin hundreds of megabytes for multi-channel
    sweeps.
    """

    method: str
    velocity: float
    iterations: int
    series: DistanceSeries
    d_avg_db: float
    d_avg_shifted_db: float
    wall_clock_s: float
    archive_path: str
    segment_params: list = field(default_factory=list)
    logliks: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: str
    out_dir: str
    runs: list = field(default_factory=list)
    summary_path: str = ""
    seeds: dict = field(default_factory=dict)

    def find_run(self, method: str, velocity: float) -> MethodRun:
        for run in self.runs:
            if run.method == method and run.velocity == velocity:
                return run
        raise ConfigError(f"no run for method={method} velocity={velocity:g}")


def _synthesize_chunk(args) -> list:
    sphere, angles = args
    return [(float(a), synthesize_hrir(sphere, float(a)).taps)
            for a in angles]


def warm_grid(sphere: SphereConfig, angles: np.ndarray,
              workers: int) -> HrirGrid:
    """Synthesize the reference responses for ``angles``, optionally in a
    worker pool.  Each angle is an independent pure computation, so pooled
    and serial warm-up fill the cache with identical values."""
    from ..sphere import ANGLE_QUANTUM

    grid = HrirGrid(sphere)
    folded = np.abs(((np.asarray(angles, dtype=float) + 180.0) % 360.0)
                    - 180.0)
    uniq = np.unique(np.round(folded / ANGLE_QUANTUM) * ANGLE_QUANTUM)
    if workers > 1 and uniq.size > 256:
        chunks = [c for c in np.array_split(uniq, workers * 4) if c.size]
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            for part in pool.map(_synthesize_chunk,
                                 [(sphere, c) for c in chunks]):
                for angle, taps in part:
                    grid.store(angle, HRIR(taps, sphere.sample_rate))
    else:
        grid.prefill(uniq)
    return grid


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: list, rows: list) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _identify(config: ExperimentConfig, method: str,
              excitation: ExcitationSignal, sim: SimulationOutput,
              workers: int):
    """Run one identification method; returns (estimates, params, logliks)."""
    taps, sources = config.taps, config.sources
    if method == "nlms_wn" or method == "nlms_pseq":
        est = nlms_run(excitation.data, sim.y, taps, sources,
                       step=config.nlms_step, eps=config.nlms_eps)
        return est, [], []
    if method == "diag_kf":
        est = diag_kalman_run(excitation.data, sim.y, taps, sources,
                              sigma_fixed=config.diag_kf_sigma,
                              time_constant=config.diag_kf_time_constant_s,
                              sample_rate=config.sample_rate)
        return est, [], []
    if method == "proposed":
        plan = plan_segments(sim.y.shape[0], config.frame_len,
                             config.lookback, config.lookahead)
        result = identify_proposed(excitation.data, sim.y, taps, sources,
                                   plan, config.init_params(),
                                   config.iterations, workers=workers)
        return result.estimates, result.segment_params, result.logliks
    raise ConfigError(f"unknown method {method!r}")


def _make_excitation(config: ExperimentConfig, kind: str, total: int,
                     seed: int) -> ExcitationSignal:
    if kind == "pseq":
        return multichannel_pseq(config.taps, config.sources, total, seed)
    return gen_white_noise(config.sources, total, seed)


def _export_simulation(dir_path: Path, config: ExperimentConfig,
                       excitation: ExcitationSignal,
                       sim: SimulationOutput) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    bits = config.wav_bits
    write_wav(dir_path / "mic.wav", sim.y, config.sample_rate, bits)
    write_wav(dir_path / "clean.wav", sim.d, config.sample_rate, bits)
    write_wav(dir_path / "excitation.wav", excitation.data,
              config.sample_rate, bits)
    rows = [(k, k / config.sample_rate, float(sim.angle[k]))
            for k in range(sim.angle.shape[0])]
    write_csv(dir_path / "angle.csv", ["k", "time_s", "angle_deg"], rows)


def _per_sample_rows(config: ExperimentConfig, sim: SimulationOutput,
                     series: DistanceSeries):
    sources = config.sources
    header = ["k", "time_s", "angle_deg"]
    header += [f"d_db_s{s + 1}" for s in range(sources)]
    header += [f"d_shifted_db_s{s + 1}" for s in range(sources)]
    header += [f"tvi_db_s{s + 1}" for s in range(sources)]
    total = sim.y.shape[0]
    rows = []
    for k in range(total):
        row = [k, k / config.sample_rate, float(sim.angle[k])]
        row += [float(series.d_db[k, s]) for s in range(sources)]
        row += [float(series.d_shifted_db[k, s]) for s in range(sources)]
        row += [float(series.tvi_db[k, s]) for s in range(sources)]
        rows.append(row)
    return header, rows


def run_experiment(config: ExperimentConfig, out_dir,
                   force: bool = False, workers: int | None = None,
                   dry_run: bool = False) -> ExperimentResult:
    """Execute the configured sweep and persist all outputs under out_dir.

    ``dry_run`` validates and writes the resolved plan without computing.
    Re-running with the same config file reproduces summary.csv and every
    per-sample CSV byte for byte (wall-clock timings live in timing.csv).
    """
    config.validate_semantics()
    if workers is None:
        workers = default_workers()
    out_dir = Path(out_dir)
    summary_path = out_dir / "summary.csv"
    if summary_path.exists() and not force and not dry_run:
        raise OutputExistsError(
            f"{summary_path} exists; pass force=True to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    result = ExperimentResult(config=config, config_hash=chash,
                              out_dir=str(out_dir))
    (out_dir / "config.resolved.json").write_text(
        json.dumps(json.loads(config.canonical_json()), indent=2,
                   sort_keys=True) + "\n")
    plan_rows = []
    for velocity in config.velocities_deg_per_s:
        total = config.duration_for(velocity)
        for method in config.methods:
            plan_rows.append((method, velocity, total,
                              METHOD_EXCITATION[method]))
    write_csv(out_dir / "plan.csv",
              ["method", "velocity_deg_per_s", "samples", "excitation"],
              plan_rows)
    if dry_run:
        return result

    summary_rows = []
    timing_rows = []
    start_k = config.convergence_samples()
    shift = config.resolved_shift()
    sphere = config.sphere_config()
    layout = config.resolved_layout()
    for velocity in config.velocities_deg_per_s:
        total = config.duration_for(velocity)
        seeds = seeds_for(config, velocity)
        result.seeds[f"v{velocity:g}"] = seeds
        traj = RotationTrajectory(start_angle=config.start_angle,
                                  velocity=velocity,
                                  sample_rate=config.sample_rate)
        angles = angle_at(traj, np.arange(total))
        incidences = source_incidences(layout, angles, sphere)
        grid = warm_grid(sphere, incidences.ravel(), workers)

        kinds = sorted({METHOD_EXCITATION[m] for m in config.methods})
        sims = {}
        excitations = {}
        for kind in kinds:
            exc = _make_excitation(config, kind, total, seeds["excitation"])
            sim = simulate_measurement(layout, exc, traj, sphere,
                                       config.snr_db, seeds["noise"],
                                       grid=grid)
            excitations[kind], sims[kind] = exc, sim
            _export_simulation(out_dir / f"sim_v{velocity:g}_{kind}",
                               config, exc, sim)

        for method in config.methods:
            kind = METHOD_EXCITATION[method]
            exc, sim = excitations[kind], sims[kind]
            t0 = time.perf_counter()
            estimates, seg_params, logliks = _identify(config, method, exc,
                                                       sim, workers)
            wall = time.perf_counter() - t0
            series = distance_series(sim.references, estimates,
                                     start=start_k, shift=shift)
            d_avg = average_system_distance(
                series.d_db, start_k, per_channel=config.per_channel_average)
            d_avg_shift = average_system_distance(
                series.d_shifted_db, max(start_k, shift),
                per_channel=config.per_channel_average)
            label = f"{method}_v{velocity:g}"
            run_dir = out_dir / label
            run_dir.mkdir(exist_ok=True)
            header, rows = _per_sample_rows(config, sim, series)
            write_csv(run_dir / "per_sample.csv", header, rows)
            est_dec, ang_dec = decimate(estimates, sim.angle,
                                        config.archive_decimation)
            archive = HrirSetArchive(
                estimates=est_dec, angles=ang_dec,
                sample_rate=config.sample_rate,
                decimation=config.archive_decimation,
                meta={"config_hash": chash, "method": method,
                      "velocity_deg_per_s": velocity,
                      "iterations": config.iterations
                      if method == "proposed" else 0,
                      "seeds": seeds, "tool_version": __version__,
                      "config": json.loads(config.canonical_json())})
            archive_path = run_dir / "estimates.hrirset"
            write_archive(archive_path, archive)
            if logliks:
                ll_rows = [(si, it, ll)
                           for si, lls in enumerate(logliks)
                           for it, ll in enumerate(lls)]
                write_csv(run_dir / "loglik.csv",
                          ["segment", "estep", "loglik"], ll_rows)
            iterations = config.iterations if method == "proposed" else 0
            run = MethodRun(method=method, velocity=velocity,
                            iterations=iterations, series=series,
                            d_avg_db=d_avg, d_avg_shifted_db=d_avg_shift,
                            wall_clock_s=wall, archive_path=str(archive_path),
                            segment_params=seg_params[:1], logliks=logliks)
            result.runs.append(run)
            summary_rows.append((method, velocity, iterations, d_avg,
                                 d_avg_shift, chash))
            timing_rows.append((label, wall))
        # free the per-velocity bulk before the next sweep point
        del sims, excitations, grid

    write_csv(summary_path,
              ["method", "velocity_deg_per_s", "iterations", "d_avg_db",
               "d_avg_shifted_db", "config_hash"], summary_rows)
    write_csv(out_dir / "timing.csv", ["run", "wall_clock_s"], timing_rows)
    result.summary_path = str(summary_path)
    for figure in config.emit_figures:
        header, rows = emit_plot_data(result, figure)
        plots = out_dir / "plots"
        plots.mkdir(exist_ok=True)
        write_csv(plots / f"{figure}.csv", header, rows)
    return result


def emit_plot_data(result: ExperimentResult, figure: str):
    """Figure-specific CSV data from an experiment result.

    fig2: learned transition/process-noise matrices of the first segment of
    the first proposed run, flattened, with the display warping
    ``|x| ** (1/10)`` in a separate column (the warping is display-only).
    fig3: per-sample distance traces and TVI at the first velocity.
    fig4/fig5: average distance versus velocity per method.
    """
    if figure == "fig2":
        for run in result.runs:
            if run.method == "proposed" and run.segment_params:
                params = run.segment_params[0]
                rows = []
                for name, matrix in (("A", params.A), ("gamma", params.gamma)):
                    for i in range(matrix.shape[0]):
                        for j in range(matrix.shape[1]):
                            value = float(matrix[i, j])
                            rows.append((name, i, j, value,
                                         abs(value) ** 0.1))
                return ["matrix", "row", "col", "value", "warped_abs"], rows
        raise ConfigError("fig2 needs a proposed-method run")
    if figure == "fig3":
        velocity = result.config.velocities_deg_per_s[0]
        runs = [r for r in result.runs if r.velocity == velocity]
        if not runs:
            raise ConfigError("fig3 needs runs at the first velocity")
        header = ["k", "time_s"] + [r.method for r in runs]
        shifted = [r for r in runs if r.method == "nlms_pseq"]
        if shifted:
            header.append("nlms_pseq_shifted")
        header.append("tvi_db")
        total = runs[0].series.d_db.shape[0]
        rows = []
        for k in range(total):
            row = [k, k / result.config.sample_rate]
            row += [float(r.series.d_db[k, 0]) for r in runs]
            if shifted:
                row.append(float(shifted[0].series.d_shifted_db[k, 0]))
            row.append(float(runs[0].series.tvi_db[k, 0]))
            rows.append(row)
        return header, rows
    if figure in ("fig4", "fig5"):
        if figure == "fig5" and result.config.sources != 3:
            raise ConfigError("fig5 is the three-channel comparison")
        rows = [(r.method, r.velocity, r.iterations, r.d_avg_db,
                 r.d_avg_shifted_db) for r in result.runs]
        return ["method", "velocity_deg_per_s", "iterations", "d_avg_db",
                "d_avg_shifted_db"], rows
    raise ConfigError(f"unknown figure {figure!r}")
