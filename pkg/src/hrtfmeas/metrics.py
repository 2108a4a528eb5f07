"""Quality measures between estimated and reference impulse responses.

All dB values are floored at -300 dB so downstream CSV files stay finite;
the floor is an explicit sentinel, not a numerical accident.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DB_FLOOR = -300.0


def _ratio_db(num: float, den: float) -> float:
    if num <= 0.0:
        return DB_FLOOR
    return max(10.0 * np.log10(num / den), DB_FLOOR)


def system_distance(h_ref: np.ndarray, h_est: np.ndarray) -> float:
    """Relative system distance (normalized misalignment) in dB.

    The estimate is zero-padded to the reference length; the value is
    ``10 log10(||h_ref - h_est||^2 / ||h_ref||^2)``.
    """
    h_ref = np.asarray(h_ref, dtype=np.float64)
    h_est = np.asarray(h_est, dtype=np.float64)
    if h_est.shape[0] > h_ref.shape[0]:
        raise ConfigError("estimate longer than reference")
    den = float(np.dot(h_ref, h_ref))
    if den <= 0.0:
        raise ConfigError("zero-norm reference in system distance")
    diff = h_ref.copy()
    diff[:h_est.shape[0]] -= h_est
    return _ratio_db(float(np.dot(diff, diff)), den)


def tvi(h_curr: np.ndarray, h_prev: np.ndarray) -> float:
    """Time-variance index between consecutive references, dB."""
    h_curr = np.asarray(h_curr, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    den = float(np.dot(h_prev, h_prev))
    if den <= 0.0:
        raise ConfigError("zero-norm previous response in TVI")
    diff = h_curr - h_prev
    return _ratio_db(float(np.dot(diff, diff)), den)


@dataclass
class DistanceSeries:
    """Per-sample, per-channel distances plus the TVI trace.

    Entries before ``start`` (and, for the shifted variant, before the
    shift) are NaN.  ``start`` is conventionally ``2 * sources * taps``, the
    initial convergence phase excluded from averages.
    """

    d_db: np.ndarray                   # (samples, sources)
    start: int
    shift: int = 0
    d_shifted_db: np.ndarray | None = None
    tvi_db: np.ndarray | None = None   # (samples, sources)


def distance_series(references: np.ndarray, estimates: np.ndarray,
                    start: int, shift: int = 0,
                    with_tvi: bool = True) -> DistanceSeries:
    """Distances of ``estimates`` (N, S, L) against ``references`` (N, S, Lt).

    The shifted variant compares the estimate at sample k with the reference
    from ``shift`` samples earlier, which compensates the systematic lag of
    periodic-excitation estimators.
    """
    n, sources, taps_ref = references.shape
    if estimates.shape[0] != n or estimates.shape[1] != sources:
        raise ConfigError("references and estimates must align")
    if estimates.shape[2] > taps_ref:
        raise ConfigError("estimate longer than reference")
    if not 0 <= start < n:
        raise ConfigError("start index out of range")

    ref_energy = np.einsum("nsl,nsl->ns", references, references)
    if np.any(ref_energy[start:] <= 0.0):
        raise ConfigError("zero-norm reference in scored range")

    def _distances(ref_idx: np.ndarray, k_idx: np.ndarray) -> np.ndarray:
        diff = references[ref_idx].copy()
        diff[:, :, :estimates.shape[2]] -= estimates[k_idx]
        num = np.einsum("nsl,nsl->ns", diff, diff)
        den = ref_energy[ref_idx]
        with np.errstate(divide="ignore"):
            out = 10.0 * np.log10(num / den)
        return np.maximum(out, DB_FLOOR)

    d_db = np.full((n, sources), np.nan)
    ks = np.arange(start, n)
    d_db[ks] = _distances(ks, ks)

    d_shifted = None
    if shift > 0:
        d_shifted = np.full((n, sources), np.nan)
        ks = np.arange(max(start, shift), n)
        d_shifted[ks] = _distances(ks - shift, ks)

    tvi_db = None
    if with_tvi:
        tvi_db = np.full((n, sources), np.nan)
        diff = references[1:] - references[:-1]
        num = np.einsum("nsl,nsl->ns", diff, diff)
        den = ref_energy[:-1]
        with np.errstate(divide="ignore"):
            vals = 10.0 * np.log10(num / den)
        tvi_db[1:] = np.maximum(vals, DB_FLOOR)

    return DistanceSeries(d_db=d_db, start=start, shift=shift,
                          d_shifted_db=d_shifted, tvi_db=tvi_db)


def average_system_distance(series: np.ndarray, start: int,
                            per_channel: bool = True) -> float:
    """Average distance over samples ``k >= start`` and all channels.

    ``per_channel=True`` divides by channels times samples so multi-channel
    averages live on the same dB scale as single-channel ones;
    ``per_channel=False`` reproduces the literal sum-over-channels form
    (divide by samples only).
    """
    if series.ndim != 2:
        raise ConfigError("series must be (samples, channels)")
    tail = series[start:]
    tail = tail[~np.isnan(tail).any(axis=1)]
    if tail.size == 0:
        raise ConfigError("empty averaging range")
    total = float(tail.sum())
    count = tail.shape[0] * (tail.shape[1] if per_channel else 1)
    return total / count
