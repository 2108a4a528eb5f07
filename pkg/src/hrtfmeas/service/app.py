"""HTTP service wrapping the measurement toolkit.

All heavy data moves through the filesystem (the service computes on
server-local paths); request and response bodies carry configuration and
scalar summaries.  Errors map to a JSON body with a ``category`` that
clients translate into exit codes: validation, numerical, io.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, HrtfMeasError
from ..harness.config import ExperimentConfig
from ..harness.experiment import run_experiment
from ..harness.ingest import ingest_recording
from ..harness.ops import (evaluate_archive, identify_recording,
                           load_angle_track, simulate_to_dir,
                           synthesize_hrtf_set)
from .models import (EvaluateRequest, EvaluateResponse, ExperimentRequest,
                     ExperimentResponse, IdentifyRequest, IdentifyResponse,
                     IngestRequest, IngestResponse, RunSummary,
                     SimulateRequest, SimulateResponse, SynthesizeRequest,
                     SynthesizeResponse)

_STATUS = {"validation": 400, "numerical": 422, "io": 500}


def create_app() -> FastAPI:
    app = FastAPI(title="hrtfmeas", version=__version__)

    @app.exception_handler(HrtfMeasError)
    async def _domain_error(request: Request, exc: HrtfMeasError):
        return JSONResponse(status_code=_STATUS.get(exc.category, 500),
                            content={"category": exc.category,
                                     "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request,
                                exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"category": "validation",
                                     "detail": str(exc)})

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/synthesize-hrtf", response_model=SynthesizeResponse)
    def synthesize(req: SynthesizeRequest):
        if (req.angles is None) == (req.grid is None):
            raise ConfigError("exactly one of angles or grid required")
        if req.angles is not None:
            angles = np.asarray(req.angles, dtype=float)
        else:
            angles = np.arange(req.grid.start, req.grid.stop + 1e-9,
                               req.grid.step)
        sphere = req.sphere.to_sphere_config(
            req.sample_rate, req.sphere.support_taps or req.sphere.ref_taps)
        out = synthesize_hrtf_set(sphere, angles, req.out, req.force)
        return SynthesizeResponse(**out)

    @app.post("/v1/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        out = simulate_to_dir(req.config, req.velocity_deg_per_s,
                              req.out_dir, req.force)
        return SimulateResponse(**out)

    @app.post("/v1/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest):
        result = ingest_recording(
            req.mic, req.mic_channel, req.excitation, req.source_channels,
            req.regen.model_dump() if req.regen else None,
            req.expect_sample_rate)
        return IngestResponse(sample_rate=result.sample_rate,
                              samples=int(result.y.shape[0]),
                              channels=result.excitation.channels,
                              excitation_kind=result.excitation.kind)

    @app.post("/v1/identify", response_model=IdentifyResponse)
    def identify(req: IdentifyRequest):
        ingest_result = ingest_recording(
            req.mic, req.mic_channel, req.excitation, req.source_channels,
            req.regen.model_dump() if req.regen else None,
            expect_sample_rate=req.config.sample_rate)
        angles = None
        if req.angles:
            angles = load_angle_track(req.angles,
                                      ingest_result.y.shape[0])
        out = identify_recording(req.config, req.method, ingest_result,
                                 req.out, req.force, angles=angles)
        return IdentifyResponse(**out)

    @app.post("/v1/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        out = evaluate_archive(req.estimates, req.out_dir,
                               req.per_channel_average, req.force)
        return EvaluateResponse(**out)

    @app.post("/v1/experiment", response_model=ExperimentResponse)
    def experiment(req: ExperimentRequest):
        result = run_experiment(req.config, req.out_dir, force=req.force,
                                dry_run=req.dry_run)
        runs = [RunSummary(method=r.method, velocity_deg_per_s=r.velocity,
                           iterations=r.iterations, d_avg_db=r.d_avg_db,
                           d_avg_shifted_db=r.d_avg_shifted_db,
                           wall_clock_s=r.wall_clock_s)
                for r in result.runs]
        return ExperimentResponse(out_dir=result.out_dir,
                                  config_hash=result.config_hash,
                                  summary_csv=result.summary_path or None,
                                  dry_run=req.dry_run, runs=runs)

    return app


app = create_app()
