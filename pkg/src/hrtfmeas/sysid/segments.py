"""Segmentation of a recording into overlapping EM windows and the
segment-parallel identification pipeline of the learned-smoother method.

Frames tile the recording; each window extends its frame by a lookback and
lookahead (clipped at the edges).  Estimates are kept only inside a
segment's output range: the frame, widened to the window edge for the first
and last segment so every sample receives exactly one final estimate.
Segments are fitted independently from identical initial parameters, so any
execution order (serial or pooled) produces bit-identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from ..errors import ConfigError, NumericalFailureError
from .em import SegmentFit, em_fit_segment
from .params import StateSpaceParams

#: BLAS threads used inside one segment fit.  Fixed (not configurable) so
#: that serial and pooled execution produce identical floating-point
#: results; parallelism comes from fitting segments concurrently.
SEGMENT_BLAS_THREADS = 1


@dataclass(frozen=True)
class Segment:
    window: tuple   # [start, stop) samples fed to the fit
    frame: tuple    # [start, stop) nominal frame
    output: tuple   # [start, stop) samples whose estimates are kept
    first: bool
    last: bool


@dataclass
class SegmentPlan:
    total: int
    frame_len: int
    lookback: int
    lookahead: int
    segments: list = field(default_factory=list)


def plan_segments(total: int, frame_len: int, lookback: int,
                  lookahead: int) -> SegmentPlan:
    """Partition ``total`` samples into frames with clipped overlap windows.

    The frames tile [0, total) exactly once; output ranges extend the first
    frame across its (clipped) lookback region and the last frame across its
    lookahead region.
    """
    if frame_len < 1:
        raise ConfigError("frame length must be at least 1")
    if lookback < 0 or lookahead < 0:
        raise ConfigError("lookback and lookahead must be non-negative")
    if total < 1:
        raise ConfigError("empty signal")
    plan = SegmentPlan(total=total, frame_len=frame_len, lookback=lookback,
                       lookahead=lookahead)
    starts = list(range(0, total, frame_len))
    for idx, fs in enumerate(starts):
        fe = min(fs + frame_len, total)
        ws = max(0, fs - lookback)
        we = min(total, fe + lookahead)
        first = idx == 0
        last = idx == len(starts) - 1
        out = (ws if first else fs, we if last else fe)
        plan.segments.append(Segment(window=(ws, we), frame=(fs, fe),
                                     output=out, first=first, last=last))
    return plan


@dataclass
class ProposedResult:
    """Concatenated smoothed estimates plus per-segment diagnostics."""

    estimates: np.ndarray       # (total, sources, taps)
    segment_params: list        # StateSpaceParams per segment
    logliks: list               # list of per-iteration log-likelihoods
    plan: SegmentPlan


def _fit_segment_task(args) -> tuple:
    (index, excitation, y, window, init, iterations) = args
    with threadpool_limits(limits=SEGMENT_BLAS_THREADS):
        try:
            fit = em_fit_segment(excitation, y, window, init, iterations)
        except NumericalFailureError as err:
            raise NumericalFailureError(f"segment {index}: {err}") from err
    return index, fit


def default_workers() -> int:
    """Worker-pool size: HRTFMEAS_WORKERS if set, else the CPU count."""
    env = os.environ.get("HRTFMEAS_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError as err:
            raise ConfigError(f"bad HRTFMEAS_WORKERS value {env!r}") from err
        if value < 1:
            raise ConfigError("HRTFMEAS_WORKERS must be at least 1")
        return value
    return os.cpu_count() or 1


def identify_proposed(excitation: np.ndarray, y: np.ndarray, taps: int,
                      sources: int, plan: SegmentPlan,
                      init: StateSpaceParams, iterations: int,
                      workers: int | None = None) -> ProposedResult:
    """Fit every segment independently and concatenate the frame estimates.

    Each segment starts from the same ``init``.  With ``workers > 1``
    segments run in a process pool; scheduling cannot change the numbers
    because segments share only immutable inputs and each fit runs under a
    fixed BLAS thread count.
    """
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if excitation.shape[0] != sources:
        raise ConfigError("excitation channel count must match sources")
    if init.dim != taps * sources:
        raise ConfigError("initial parameters sized for a different model")
    if plan.total != y.shape[0]:
        raise ConfigError("segment plan does not match the signal length")
    if workers is None:
        workers = default_workers()

    tasks = [(i, excitation, y, seg.window, init, iterations)
             for i, seg in enumerate(plan.segments)]
    fits: dict[int, SegmentFit] = {}
    if workers > 1 and len(tasks) > 1:
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            for index, fit in pool.map(_fit_segment_task, tasks):
                fits[index] = fit
    else:
        for task in tasks:
            index, fit = _fit_segment_task(task)
            fits[index] = fit

    total = plan.total
    estimates = np.empty((total, sources, taps))
    segment_params = []
    logliks = []
    for i, seg in enumerate(plan.segments):
        fit = fits[i]
        ws = seg.window[0]
        lo, hi = seg.output
        estimates[lo:hi] = fit.estimates[lo - ws:hi - ws].reshape(
            hi - lo, sources, taps)
        segment_params.append(fit.params)
        logliks.append(fit.logliks)
    return ProposedResult(estimates=estimates, segment_params=segment_params,
                          logliks=logliks, plan=plan)
