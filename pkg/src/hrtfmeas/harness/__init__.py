"""Experiment configuration, orchestration, ingestion, and plot-data export."""

from .config import (ExperimentConfig, InitSettings, SourceDirection,
                     SphereSettings, load_config, seeds_for)
from .experiment import (ExperimentResult, MethodRun, emit_plot_data,
                         run_experiment, warm_grid, write_csv)
from .ingest import IngestResult, ingest_recording, regen_excitation

__all__ = [
    "ExperimentConfig", "ExperimentResult", "IngestResult", "InitSettings",
    "MethodRun", "SourceDirection", "SphereSettings", "emit_plot_data",
    "ingest_recording", "load_config", "regen_excitation", "run_experiment",
    "seeds_for", "warm_grid", "write_csv",
]
