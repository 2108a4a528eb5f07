"""Single-shot operations behind the service: synthesize, identify on
ingested recordings, evaluate a stored estimate archive."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ConfigError, OutputExistsError
from ..io.archive import HrirSetArchive, read_archive, write_archive
from ..metrics import average_system_distance, distance_series
from ..simulate import references_for, source_incidences
from ..sphere import SphereConfig, quantize_angle, synthesize_hrir
from ..sysid import (default_workers, diag_kalman_run, identify_proposed,
                     nlms_run, plan_segments)
from .config import ExperimentConfig
from .experiment import warm_grid, write_csv
from .ingest import IngestResult


def _check_out(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise OutputExistsError(f"{path} exists; use force to overwrite")


def synthesize_hrtf_set(sphere: SphereConfig, angles: np.ndarray,
                        out: str | None, force: bool = False) -> dict:
    """Synthesize reference responses for a list of incidence angles."""
    angles = np.asarray([quantize_angle(float(a)) for a in angles])
    if angles.size == 0:
        raise ConfigError("no angles requested")
    taps = np.stack([synthesize_hrir(sphere, a).taps for a in angles])
    archive_path = None
    if out:
        path = Path(out)
        _check_out(path, force)
        path.parent.mkdir(parents=True, exist_ok=True)
        archive = HrirSetArchive(
            estimates=taps[:, None, :], angles=angles,
            sample_rate=sphere.sample_rate,
            meta={"kind": "sphere-reference", "tool_version": __version__,
                  "radius_m": sphere.radius,
                  "source_distance_m": sphere.source_distance,
                  "gain": "free-field normalized at sphere center, unity "
                          "DC per incidence, 1/r removed, delay retained"})
        write_archive(path, archive)
        archive_path = str(path)
    return {"angles": [float(a) for a in angles],
            "taps": int(taps.shape[1]),
            "sample_rate": sphere.sample_rate,
            "archive": archive_path,
            "responses": taps.tolist() if angles.size <= 64 else None}


def simulate_to_dir(config: ExperimentConfig, velocity: float, out_dir,
                    force: bool = False, workers: int | None = None) -> dict:
    """Simulate one continuous measurement and export WAV + angle track."""
    from ..simulate import RotationTrajectory, angle_at, simulate_measurement
    from .config import seeds_for
    from .experiment import _export_simulation, _make_excitation

    config.validate_semantics()
    if workers is None:
        workers = default_workers()
    total = config.duration_for(velocity)
    seeds = seeds_for(config, velocity)
    sphere = config.sphere_config()
    layout = config.resolved_layout()
    traj = RotationTrajectory(start_angle=config.start_angle,
                              velocity=velocity,
                              sample_rate=config.sample_rate)
    angles = angle_at(traj, np.arange(total))
    incidences = source_incidences(layout, angles, sphere)
    grid = warm_grid(sphere, incidences.ravel(), workers)
    exc = _make_excitation(config, config.excitation, total,
                           seeds["excitation"])
    sim = simulate_measurement(layout, exc, traj, sphere, config.snr_db,
                               seeds["noise"], grid=grid)
    out = Path(out_dir)
    _check_out(out / "mic.wav", force)
    _export_simulation(out, config, exc, sim)
    files = sorted(p.name for p in out.iterdir() if p.is_file())
    return {"out_dir": str(out), "samples": total,
            "achieved_snr_db": float(sim.achieved_snr_db), "seeds": seeds,
            "files": files}


def load_angle_track(path, expect_samples: int) -> np.ndarray:
    """Rotation angles from a simulator angle.csv (k, time_s, angle_deg)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such angle track: {path}")
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
        angles = np.asarray(data["angle_deg"], dtype=np.float64)
    except (ValueError, KeyError) as err:
        raise ConfigError(f"bad angle track {path}: {err}") from err
    if angles.shape[0] != expect_samples:
        raise ConfigError(
            f"angle track length {angles.shape[0]} does not match the "
            f"recording ({expect_samples} samples)")
    return angles


def identify_recording(config: ExperimentConfig, method: str,
                       ingest: IngestResult, out: str, force: bool = False,
                       workers: int | None = None,
                       angles: np.ndarray | None = None) -> dict:
    """Identify time-variant responses from an ingested recording and write
    the estimate archive.

    ``angles`` is the optional per-sample rotation track (degrees); when
    present it is stored in the archive so the estimates can be evaluated
    against regenerated references or mapped to orientations.
    """
    config.validate_semantics()
    if ingest.sample_rate != config.sample_rate:
        raise ConfigError(
            f"recording rate {ingest.sample_rate:g} Hz does not match the "
            f"configured {config.sample_rate:g} Hz")
    if ingest.excitation.channels != config.sources:
        raise ConfigError("excitation channels must match configured sources")
    if workers is None:
        workers = default_workers()
    taps, sources = config.taps, config.sources
    y = ingest.y
    segments = 0
    if method in ("nlms_wn", "nlms_pseq"):
        estimates = nlms_run(ingest.excitation.data, y, taps, sources,
                             step=config.nlms_step, eps=config.nlms_eps)
    elif method == "diag_kf":
        estimates = diag_kalman_run(
            ingest.excitation.data, y, taps, sources,
            sigma_fixed=config.diag_kf_sigma,
            time_constant=config.diag_kf_time_constant_s,
            sample_rate=config.sample_rate)
    elif method == "proposed":
        plan = plan_segments(y.shape[0], config.frame_len, config.lookback,
                             config.lookahead)
        segments = len(plan.segments)
        estimates = identify_proposed(
            ingest.excitation.data, y, taps, sources, plan,
            config.init_params(), config.iterations,
            workers=workers).estimates
    else:
        raise ConfigError(f"unknown method {method!r}")

    if angles is not None:
        angles = np.asarray(angles, dtype=np.float64)
        if angles.shape[0] != y.shape[0]:
            raise ConfigError("angle track must match the recording length")
    path = Path(out)
    _check_out(path, force)
    path.parent.mkdir(parents=True, exist_ok=True)
    archive = HrirSetArchive(
        estimates=estimates,
        angles=(angles if angles is not None
                else np.full(y.shape[0], np.nan)),
        sample_rate=config.sample_rate,
        meta={"config_hash": config.config_hash(), "method": method,
              "iterations": config.iterations if method == "proposed" else 0,
              "source": ingest.meta, "tool_version": __version__,
              "config": json.loads(config.canonical_json())})
    write_archive(path, archive)
    return {"archive": str(path), "samples": int(y.shape[0]),
            "method": method, "segments": segments}


def evaluate_archive(estimates_path: str, out_dir: str,
                     per_channel: bool = True, force: bool = False,
                     workers: int | None = None) -> dict:
    """Score a stored estimate archive against regenerated references.

    The archive must carry its generating config (embedded by the
    experiment runner) and per-sample rotation angles; references are
    regenerated deterministically from those.
    """
    arch = read_archive(estimates_path)
    if arch.decimation != 1:
        raise ConfigError("evaluation needs an undecimated archive")
    if not arch.meta or "config" not in arch.meta:
        raise ConfigError(f"{estimates_path} has no embedded config")
    if np.any(~np.isfinite(arch.angles)):
        raise ConfigError(
            f"{estimates_path} has no rotation-angle track (produced by "
            "'identify'?); evaluation needs simulation provenance")
    if workers is None:
        workers = default_workers()
    config = ExperimentConfig.model_validate(arch.meta["config"])
    config.validate_semantics()
    sphere = config.sphere_config()
    layout = config.resolved_layout()
    incidences = source_incidences(layout, arch.angles, sphere)
    grid = warm_grid(sphere, incidences.ravel(), workers)
    references = references_for(grid, incidences)

    start = config.convergence_samples()
    shift = config.resolved_shift()
    series = distance_series(references, arch.estimates, start=start,
                             shift=shift)
    d_avg = average_system_distance(series.d_db, start,
                                    per_channel=per_channel)
    d_avg_shift = average_system_distance(series.d_shifted_db,
                                          max(start, shift),
                                          per_channel=per_channel)
    out = Path(out_dir)
    per_sample = out / "per_sample.csv"
    _check_out(per_sample, force)
    out.mkdir(parents=True, exist_ok=True)
    sources = references.shape[1]
    header = ["k", "time_s"]
    header += [f"d_db_s{s + 1}" for s in range(sources)]
    header += [f"d_shifted_db_s{s + 1}" for s in range(sources)]
    header += [f"tvi_db_s{s + 1}" for s in range(sources)]
    rows = []
    for k in range(references.shape[0]):
        row = [k, k / config.sample_rate]
        row += [float(series.d_db[k, s]) for s in range(sources)]
        row += [float(series.d_shifted_db[k, s]) for s in range(sources)]
        row += [float(series.tvi_db[k, s]) for s in range(sources)]
        rows.append(row)
    write_csv(per_sample, header, rows)
    (out / "evaluation.json").write_text(json.dumps(
        {"d_avg_db": d_avg, "d_avg_shifted_db": d_avg_shift,
         "samples": int(references.shape[0]),
         "config_hash": arch.meta.get("config_hash"),
         "method": arch.meta.get("method")}, indent=2, sort_keys=True) + "\n")
    return {"d_avg_db": d_avg, "d_avg_shifted_db": d_avg_shift,
            "samples": int(references.shape[0]),
            "per_sample_csv": str(per_sample)}
