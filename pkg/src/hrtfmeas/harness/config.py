"""Experiment configuration: validated, canonicalized, hashable.

Configs are JSON documents with explicit keys; unknown keys are rejected so
typos cannot silently fall back to defaults.  The canonical serialization
(sorted keys) is hashed and embedded in every output for provenance.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import ConfigError
from ..simulate import LoudspeakerLayout
from ..sphere import SphereConfig
from ..sysid import StateSpaceParams

Method = Literal["nlms_wn", "nlms_pseq", "diag_kf", "proposed"]

#: Excitation implied by each identification method.
METHOD_EXCITATION = {
    "nlms_wn": "white_noise",
    "nlms_pseq": "pseq",
    "diag_kf": "pseq",
    "proposed": "pseq",
}


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SphereSettings(_Model):
    radius: float = 0.0875
    speed_of_sound: float = 343.0
    source_distance: float = 1.5
    ear_azimuth: float = 90.0
    ear_elevation: float = 0.0
    ref_taps: int = 315
    synthesis_fft_size: int = 1024
    band_limit: float = 0.85
    support_taps: Optional[int] = None   # default: the estimator tap count
    support_fade_taps: int = 28
    truncation_tail: float = 1e-8

    def to_sphere_config(self, sample_rate: float,
                         default_support: int) -> SphereConfig:
        return SphereConfig(
            radius=self.radius, speed_of_sound=self.speed_of_sound,
            sample_rate=sample_rate, source_distance=self.source_distance,
            ear_azimuth=self.ear_azimuth, ear_elevation=self.ear_elevation,
            ref_length=self.ref_taps,
            synthesis_fft_size=self.synthesis_fft_size,
            band_limit=self.band_limit,
            truncation_tail=self.truncation_tail,
            support_taps=(self.support_taps if self.support_taps is not None
                          else default_support),
            support_fade_taps=self.support_fade_taps)


class InitSettings(_Model):
    """Initial state-space parameters, all scalar multiples of identity."""

    transition_scale: float = 1.0
    process_noise_scale: float = 1e-7
    measurement_noise: float = 0.01
    initial_mean: float = 0.0
    initial_cov_scale: float = 1.0

    def to_params(self, dim: int) -> StateSpaceParams:
        return StateSpaceParams(
            A=self.transition_scale * np.eye(dim),
            gamma=self.process_noise_scale * np.eye(dim),
            sigma=self.measurement_noise,
            mu0=np.full(dim, self.initial_mean),
            p0=self.initial_cov_scale * np.eye(dim))


class SourceDirection(_Model):
    azimuth: float
    elevation: float


class ExperimentConfig(_Model):
    """Full description of an experiment sweep.

    One simulation is run per (velocity, excitation kind); all methods at a
    velocity score against the same noisy measurement.  Worker count and
    scratch directory intentionally come from the environment, not from the
    config, so results do not depend on where the experiment runs.
    """

    sample_rate: float = 24000.0
    sources: int = 1
    taps: int = 192
    excitation: Literal["pseq", "white_noise"] = "pseq"
    seed: int = 0
    velocities_deg_per_s: list[float] = Field(default_factory=lambda: [180.0])
    snr_db: Optional[float] = 60.0
    methods: list[Method] = Field(
        default_factory=lambda: ["nlms_pseq", "proposed"])
    iterations: int = 10
    frame_len: int = 1200
    lookback: int = 1200
    lookahead: int = 1200
    nlms_step: float = 1.0
    nlms_eps: float = 1e-12
    diag_kf_sigma: float = 1e-6
    diag_kf_time_constant_s: float = 0.05
    start_angle: float = 0.0
    layout: Optional[list[SourceDirection]] = None
    sphere: SphereSettings = Field(default_factory=SphereSettings)
    init: InitSettings = Field(default_factory=InitSettings)
    shift: Optional[int] = None
    duration_samples: Optional[int] = None
    per_channel_average: bool = True
    emit_figures: list[Literal["fig2", "fig3", "fig4", "fig5"]] = Field(
        default_factory=list)
    archive_decimation: int = 1
    wav_bits: int = 64

    # -- resolved helpers ---------------------------------------------------

    def resolved_layout(self) -> LoudspeakerLayout:
        if self.layout is None:
            return LoudspeakerLayout.default(self.sources)
        if len(self.layout) != self.sources:
            raise ConfigError("layout length must equal the source count")
        return LoudspeakerLayout(
            azimuths=tuple(s.azimuth for s in self.layout),
            elevations=tuple(s.elevation for s in self.layout))

    def resolved_shift(self) -> int:
        if self.shift is not None:
            if self.shift < 0:
                raise ConfigError("shift must be non-negative")
            return self.shift
        return self.taps * self.sources // 2

    def convergence_samples(self) -> int:
        return 2 * self.sources * self.taps

    def duration_for(self, velocity: float) -> int:
        """Recording length: the convergence phase plus a 180-degree sweep."""
        if self.duration_samples is not None:
            return self.duration_samples
        if velocity <= 0.0:
            raise ConfigError(
                "velocity 0 needs an explicit duration_samples")
        return self.convergence_samples() + int(
            math.ceil(180.0 / velocity * self.sample_rate))

    def sphere_config(self) -> SphereConfig:
        return self.sphere.to_sphere_config(self.sample_rate, self.taps)

    def init_params(self) -> StateSpaceParams:
        return self.init.to_params(self.taps * self.sources)

    def validate_semantics(self) -> None:
        if self.sources < 1:
            raise ConfigError("sources must be at least 1")
        if self.taps < 1:
            raise ConfigError("taps must be at least 1")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if not self.methods:
            raise ConfigError("at least one method required")
        if not self.velocities_deg_per_s:
            raise ConfigError("at least one velocity required")
        if self.archive_decimation < 1:
            raise ConfigError("archive_decimation must be at least 1")
        if self.wav_bits not in (32, 64):
            raise ConfigError("wav_bits must be 32 or 64")
        for v in self.velocities_deg_per_s:
            self.duration_for(v)
        self.resolved_layout()
        self.resolved_shift()
        self.sphere_config()

    # -- canonical form -----------------------------------------------------

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True,
                          separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        cfg = ExperimentConfig.model_validate_json(path.read_text())
    except ValidationError as err:
        raise ConfigError(f"invalid config {path}: {err}") from err
    cfg.validate_semantics()
    return cfg


def seeds_for(config: ExperimentConfig, velocity: float) -> dict:
    """Deterministic per-velocity sub-seeds derived from the master seed."""
    base = [config.seed, int(round(velocity * 1000.0))]
    out = {}
    for tag, name in ((0, "excitation"), (1, "noise")):
        seq = np.random.SeedSequence(base + [tag])
        out[name] = int(seq.generate_state(1, dtype=np.uint32)[0])
    return out
