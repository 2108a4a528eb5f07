"""Segment planning and the segmented identification pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrtfmeas.errors import ConfigError
from hrtfmeas.excitation import multichannel_pseq
from hrtfmeas.sysid import (StateSpaceParams, em_fit_segment,
                            identify_proposed, plan_segments)


def test_plan_matches_worked_example():
    plan = plan_segments(4800, 1200, 1200, 1200)
    frames = [s.frame for s in plan.segments]
    assert frames == [(0, 1200), (1200, 2400), (2400, 3600), (3600, 4800)]
    assert plan.segments[1].window == (0, 3600)
    assert plan.segments[0].window == (0, 2400)
    assert plan.segments[3].window == (2400, 4800)
    outputs = [s.output for s in plan.segments]
    assert outputs == frames  # lookback/lookahead fully clipped at the edges


def test_single_segment_when_short():
    plan = plan_segments(800, 1200, 1200, 1200)
    assert len(plan.segments) == 1
    seg = plan.segments[0]
    assert seg.frame == (0, 800)
    assert seg.window == (0, 800)
    assert seg.output == (0, 800)
    assert seg.first and seg.last


@settings(max_examples=60, deadline=None)
@given(total=st.integers(1, 5000), frame=st.integers(1, 1500),
       lookback=st.integers(0, 1500), lookahead=st.integers(0, 1500))
def test_outputs_tile_signal(total, frame, lookback, lookahead):
    plan = plan_segments(total, frame, lookback, lookahead)
    cursor = 0
    for seg in plan.segments:
        lo, hi = seg.output
        assert lo == cursor
        assert hi > lo
        ws, we = seg.window
        assert ws <= lo and hi <= we
        assert 0 <= ws < we <= total
        cursor = hi
    assert cursor == total


def test_plan_validation():
    with pytest.raises(ConfigError):
        plan_segments(100, 0, 10, 10)
    with pytest.raises(ConfigError):
        plan_segments(0, 10, 10, 10)
    with pytest.raises(ConfigError):
        plan_segments(100, 10, -1, 0)


def test_paper_default_segment_sizes():
    # 1200-sample frame, lookback, lookahead at 24 kHz: 50 ms each,
    # 150 ms windows for interior segments
    plan = plan_segments(24384, 1200, 1200, 1200)
    seg = plan.segments[2]
    assert (seg.frame[1] - seg.frame[0]) / 24000.0 == pytest.approx(0.05)
    assert (seg.window[1] - seg.window[0]) / 24000.0 == pytest.approx(0.15)


def _toy_problem(total=700, taps=6, sources=1, seed=0):
    rng = np.random.default_rng(seed)
    exc = multichannel_pseq(taps, sources, total, seed=3)
    h = rng.standard_normal(taps * sources)
    y = np.convolve(exc.data[0], h[:taps])[:total] \
        + 0.01 * rng.standard_normal(total)
    init = StateSpaceParams.identity_init(taps * sources, gamma_scale=1e-5,
                                          sigma=1e-3)
    return exc.data, y, init


def test_single_segment_plan_equals_direct_fit():
    exc, y, init = _toy_problem()
    plan = plan_segments(y.shape[0], y.shape[0], 100, 100)
    result = identify_proposed(exc, y, 6, 1, plan, init, iterations=2,
                               workers=1)
    direct = em_fit_segment(exc, y, (0, y.shape[0]), init, iterations=2)
    assert np.array_equal(result.estimates.reshape(y.shape[0], 6),
                          direct.estimates)
    assert result.logliks[0] == direct.logliks


def test_serial_and_pooled_runs_identical():
    exc, y, init = _toy_problem()
    plan = plan_segments(y.shape[0], 200, 150, 150)
    serial = identify_proposed(exc, y, 6, 1, plan, init, iterations=2,
                               workers=1)
    pooled = identify_proposed(exc, y, 6, 1, plan, init, iterations=2,
                               workers=2)
    assert np.array_equal(serial.estimates, pooled.estimates)
    assert serial.logliks == pooled.logliks
    for a, b in zip(serial.segment_params, pooled.segment_params):
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.gamma, b.gamma)
        assert a.sigma == b.sigma


def test_every_sample_estimated_once():
    exc, y, init = _toy_problem(total=650)
    plan = plan_segments(650, 200, 120, 120)
    result = identify_proposed(exc, y, 6, 1, plan, init, iterations=1,
                               workers=1)
    assert result.estimates.shape == (650, 1, 6)
    assert np.all(np.isfinite(result.estimates))
    assert len(result.segment_params) == len(plan.segments)
    assert all(len(ll) == 2 for ll in result.logliks)
