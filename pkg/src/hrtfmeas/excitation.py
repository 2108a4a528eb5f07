"""Excitation signal generators: white noise and perfect sequences.

A perfect sequence (PSEQ) has an impulse-like periodic autocorrelation,
which makes a static system of matching length exactly identifiable from one
period.  The multichannel variant drives ``S`` loudspeakers with circular
shifts of one base sequence so the stacked regressors stay orthogonal over a
period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

#: Redraw limit and crest-factor bound for the random-phase construction.
_MAX_DRAWS = 64
_CREST_LIMIT = 4.0


@dataclass
class ExcitationSignal:
    """Multichannel excitation: ``data`` has shape (channels, samples)."""

    data: np.ndarray
    kind: str
    seed: int
    period: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ConfigError("excitation data must be 2-D (channels, samples)")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]


def gen_white_noise(channels: int, samples: int, seed: int) -> ExcitationSignal:
    """Independent unit-variance Gaussian channels, deterministic per seed."""
    if channels < 1 or samples < 1:
        raise ConfigError("channels and samples must be positive")
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((channels, samples))
    return ExcitationSignal(data, "white_noise", seed)


def gen_pseq(period: int, seed: int) -> np.ndarray:
    """One period of a unit-power perfect sequence.

    Construction: flat-magnitude spectrum with uniformly random phases
    (conjugate-symmetric), inverse transformed and scaled to unit power.
    The flat magnitude makes the periodic autocorrelation an exact impulse,
    ``r(0) = period`` and ``r(tau != 0) = 0`` up to rounding.  Phases are
    redrawn (deterministically) while the crest factor exceeds 4; the best
    draw is kept if none qualifies.
    """
    if period < 1:
        raise ConfigError("period must be at least 1")
    rng = np.random.default_rng(seed)
    best = None
    best_crest = np.inf
    for _ in range(_MAX_DRAWS):
        half = period // 2 + 1
        phases = rng.uniform(0.0, 2.0 * np.pi, half)
        spectrum = np.exp(1j * phases)
        spectrum[0] = 1.0
        if period % 2 == 0:
            spectrum[-1] = 1.0
        x = np.fft.irfft(spectrum, n=period) * np.sqrt(period)
        crest = np.max(np.abs(x))
        if crest < best_crest:
            best, best_crest = x, crest
        if crest <= _CREST_LIMIT:
            break
    return best


def multichannel_pseq(taps: int, channels: int, samples: int,
                      seed: int) -> ExcitationSignal:
    """Shifted-PSEQ excitation for ``channels`` loudspeakers.

    One base sequence of period ``taps * channels`` is circularly shifted by
    ``taps`` samples per channel and repeated to the requested length.  The
    shifts keep all channel/lag combinations orthogonal over one period,
    which is what guarantees identification of a static system within two
    periods.
    """
    period = taps * channels
    if period > samples:
        raise ConfigError(
            f"signal too short: need at least one period ({period} samples)")
    base = gen_pseq(period, seed)
    reps = -(-samples // period)
    data = np.empty((channels, samples), dtype=np.float64)
    for s in range(channels):
        shifted = np.roll(base, s * taps)
        data[s] = np.tile(shifted, reps)[:samples]
    return ExcitationSignal(data, "pseq", seed, period=period)


def periodic_autocorrelation(x: np.ndarray) -> np.ndarray:
    """Brute-force circular autocorrelation, r(tau) = sum_k x(k) x(k+tau)."""
    period = len(x)
    return np.array([np.dot(x, np.roll(x, -tau)) for tau in range(period)])
