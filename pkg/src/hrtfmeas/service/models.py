"""Request/response models of the measurement service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..harness.config import ExperimentConfig, Method, SphereSettings


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AngleGrid(_Model):
    start: float = 0.0
    stop: float = 180.0
    step: float = 1.0


class SynthesizeRequest(_Model):
    sphere: SphereSettings = Field(default_factory=SphereSettings)
    sample_rate: float = 24000.0
    angles: Optional[list[float]] = None
    grid: Optional[AngleGrid] = None
    out: Optional[str] = None
    force: bool = False


class SynthesizeResponse(_Model):
    angles: list[float]
    taps: int
    sample_rate: float
    archive: Optional[str] = None
    # impulse responses inline only for small requests
    responses: Optional[list[list[float]]] = None


class SimulateRequest(_Model):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    velocity_deg_per_s: float = 180.0
    out_dir: str
    force: bool = False


class SimulateResponse(_Model):
    out_dir: str
    samples: int
    achieved_snr_db: float
    seeds: dict
    files: list[str]


class RegenSpec(_Model):
    kind: Literal["pseq", "white_noise"] = "pseq"
    taps: int
    channels: int
    seed: int


class IngestRequest(_Model):
    mic: str
    mic_channel: int = 0
    excitation: Optional[str] = None
    source_channels: Optional[list[int]] = None
    regen: Optional[RegenSpec] = None
    expect_sample_rate: Optional[float] = None


class IngestResponse(_Model):
    sample_rate: float
    samples: int
    channels: int
    excitation_kind: str


class IdentifyRequest(_Model):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    method: Method = "proposed"
    mic: str
    mic_channel: int = 0
    excitation: Optional[str] = None
    source_channels: Optional[list[int]] = None
    regen: Optional[RegenSpec] = None
    angles: Optional[str] = None  # simulator angle.csv for provenance
    out: str
    force: bool = False


class IdentifyResponse(_Model):
    archive: str
    samples: int
    method: str
    segments: int = 0


class EvaluateRequest(_Model):
    estimates: str
    out_dir: str
    per_channel_average: bool = True
    force: bool = False


class EvaluateResponse(_Model):
    d_avg_db: float
    d_avg_shifted_db: float
    samples: int
    per_sample_csv: str


class ExperimentRequest(_Model):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    out_dir: str
    force: bool = False
    dry_run: bool = False


class RunSummary(_Model):
    method: str
    velocity_deg_per_s: float
    iterations: int
    d_avg_db: float
    d_avg_shifted_db: float
    wall_clock_s: float


class ExperimentResponse(_Model):
    out_dir: str
    config_hash: str
    summary_csv: Optional[str] = None
    dry_run: bool = False
    runs: list[RunSummary] = Field(default_factory=list)


class ErrorBody(_Model):
    category: Literal["validation", "numerical", "io"]
    detail: str
