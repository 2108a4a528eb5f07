"""Conventional per-sample estimators: NLMS and the fixed-transition Kalman
filter with recursively averaged process noise."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..linalg import symmetrize
from .kalman import filter_step, stacked_regressors

#: Samples per regressor block; bounds peak memory for long recordings.
_CHUNK = 32768


def nlms_run(excitation: np.ndarray, y: np.ndarray, taps: int, sources: int,
             step: float = 1.0, eps: float = 1e-12) -> np.ndarray:
    """Normalized LMS on the stacked regressor.

    Returns the estimate after each update, shape (samples, sources, taps).
    """
    if not 0.0 < step <= 2.0:
        raise ConfigError("NLMS step size must lie in (0, 2]")
    if eps <= 0.0:
        raise ConfigError("NLMS regularizer must be positive")
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if excitation.shape[0] != sources:
        raise ConfigError("excitation channel count must match sources")
    total = y.shape[0]
    dim = sources * taps
    h = np.zeros(dim)
    out = np.empty((total, dim))
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        rows = stacked_regressors(excitation, taps, lo, hi)
        for i in range(hi - lo):
            x = rows[i]
            e = y[lo + i] - x @ h
            h = h + (step * e / (x @ x + eps)) * x
            out[lo + i] = h
    return out.reshape(total, sources, taps)


def diag_kalman_run(excitation: np.ndarray, y: np.ndarray, taps: int,
                    sources: int, sigma_fixed: float = 1e-6,
                    time_constant: float = 0.05,
                    sample_rate: float = 24000.0) -> np.ndarray:
    """Kalman filter with identity transition and a diagonal, time-varying
    process noise covariance.

    The diagonal entries are exponentially smoothed squares of the state
    increments with smoothing factor ``exp(-1 / (time_constant * fs))``;
    they start at zero and are non-negative by construction.
    """
    if sigma_fixed <= 0.0:
        raise ConfigError("measurement noise variance must be positive")
    if time_constant <= 0.0 or sample_rate <= 0.0:
        raise ConfigError("time constant and sample rate must be positive")
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if excitation.shape[0] != sources:
        raise ConfigError("excitation channel count must match sources")
    total = y.shape[0]
    dim = sources * taps
    alpha = float(np.exp(-1.0 / (time_constant * sample_rate)))

    mu = np.zeros(dim)
    v = np.eye(dim)
    g = np.zeros(dim)
    out = np.empty((total, dim))
    idx = np.diag_indices(dim)
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        rows = stacked_regressors(excitation, taps, lo, hi)
        for i in range(hi - lo):
            p = v.copy()
            p[idx] += g
            p = symmetrize(p)
            mu_new, v, _, _, _ = filter_step(mu, p, rows[i], y[lo + i],
                                             sigma_fixed)
            delta = mu_new - mu
            g = alpha * g + (1.0 - alpha) * delta * delta
            mu = mu_new
            out[lo + i] = mu
    return out.reshape(total, sources, taps)
