"""System distance, averaging, and the time-variance index."""

import numpy as np
import pytest

from hrtfmeas.errors import ConfigError
from hrtfmeas.metrics import (DB_FLOOR, average_system_distance,
                              distance_series, system_distance, tvi)


def test_exact_match_hits_floor():
    h = np.array([1.0, -0.5, 0.25])
    assert system_distance(h, h) == DB_FLOOR


def test_zero_estimate_is_zero_db():
    h = np.array([1.0, 2.0, -1.0])
    assert system_distance(h, np.zeros(3)) == pytest.approx(0.0, abs=1e-12)


def test_scale_invariance():
    rng = np.random.default_rng(0)
    h_ref = rng.standard_normal(32)
    h_est = rng.standard_normal(24)
    base = system_distance(h_ref, h_est)
    for alpha in (0.5, -3.0, 100.0):
        assert system_distance(alpha * h_ref, alpha * h_est) \
            == pytest.approx(base, rel=1e-12)


def test_zero_padding_of_short_estimate():
    h_ref = np.array([1.0, 0.0, 0.0, 2.0])
    h_est = np.array([1.0])
    # difference is [0, 0, 0, 2]: ratio 4/5
    assert system_distance(h_ref, h_est) \
        == pytest.approx(10 * np.log10(4.0 / 5.0), rel=1e-12)


def test_zero_reference_errors():
    with pytest.raises(ConfigError):
        system_distance(np.zeros(4), np.ones(4))
    with pytest.raises(ConfigError):
        tvi(np.ones(4), np.zeros(4))


def test_tvi_cases():
    h = np.array([1.0, 2.0])
    assert tvi(h, h) == DB_FLOOR
    assert tvi(2.0 * h, h) == pytest.approx(0.0, abs=1e-12)


def test_average_arithmetic():
    series = np.array([[-30.0], [-50.0]])
    assert average_system_distance(series, 0) == pytest.approx(-40.0)
    const = np.full((10, 3), -40.0)
    assert average_system_distance(const, 2) == pytest.approx(-40.0)
    # literal form sums channels without normalizing by S
    assert average_system_distance(const, 2, per_channel=False) \
        == pytest.approx(-120.0)
    with pytest.raises(ConfigError):
        average_system_distance(series, 2)


def test_distance_series_shift_alignment():
    n, taps = 12, 4
    rng = np.random.default_rng(1)
    refs = rng.standard_normal((n, 1, taps))
    est = np.zeros((n, 1, taps))
    shift = 3
    est[shift:, 0] = refs[:-shift, 0]  # estimates lag the truth by 3 samples
    series = distance_series(refs, est, start=0, shift=shift, with_tvi=False)
    # shifted variant matches exactly from k = shift onward
    assert np.all(series.d_shifted_db[shift:] == DB_FLOOR)
    assert np.all(np.isnan(series.d_shifted_db[:shift]))
    # unshifted variant does not
    assert np.nanmax(series.d_db[shift:]) > -40.0


def test_distance_series_tvi_matches_pairwise():
    rng = np.random.default_rng(2)
    refs = rng.standard_normal((6, 2, 5))
    est = rng.standard_normal((6, 2, 5))
    series = distance_series(refs, est, start=1)
    for k in range(1, 6):
        for s in range(2):
            assert series.d_db[k, s] == pytest.approx(
                system_distance(refs[k, s], est[k, s]), rel=1e-12)
            assert series.tvi_db[k, s] == pytest.approx(
                tvi(refs[k, s], refs[k - 1, s]), rel=1e-12)
    assert np.all(np.isnan(series.d_db[0]))
