"""Expectation-maximization for the linear state-space model.

Each iteration smooths the segment under the current parameters (E-step)
and then updates every parameter in closed form from the smoothed moments
(M-step).  The log-likelihood of the observations, evaluated before each
M-step, is non-decreasing across iterations up to floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalFailureError
from ..linalg import make_psd, sym_solve, symmetrize
from .engine import backward_pass, forward_pass
from .kalman import stacked_regressors
from .params import StateSpaceParams, SufficientStats

#: Lower bound applied to the measurement-noise update.
SIGMA_FLOOR = 1e-12


def em_mstep(stats: SufficientStats) -> StateSpaceParams:
    """Closed-form parameter updates from smoothed sufficient statistics.

    The transition matrix solves ``A S_11 = S_z1`` through a symmetric
    factorization (with jitter escalation); the process noise covariance is
    symmetrized and, only if indefinite, eigenvalue-clipped; the measurement
    noise is floored at ``SIGMA_FLOOR``.
    """
    if stats.count < 2:
        raise ConfigError("EM update needs at least two samples")
    a_new = sym_solve(stats.s_11, stats.s_z1.T,
                      context="transition update, S_11 singular").T
    gamma = (stats.s_zz - stats.s_z1 @ a_new.T - a_new @ stats.s_z1.T
             + a_new @ stats.s_11 @ a_new.T) / (stats.count - 1)
    gamma = make_psd(gamma)
    sigma = (stats.sum_yy - 2.0 * stats.sum_y_cmu
             + stats.sum_quad) / stats.count
    sigma = max(sigma, SIGMA_FLOOR)
    return StateSpaceParams(A=a_new, gamma=gamma, sigma=sigma,
                            mu0=stats.mu1.copy(), p0=symmetrize(stats.v1))


@dataclass
class SegmentFit:
    """Result of fitting one segment: final parameters, smoothed means over
    the window, and the log-likelihood after each E-step (the last entry
    belongs to the final smoothing under the learned parameters)."""

    params: StateSpaceParams
    estimates: np.ndarray          # (window length, state dim)
    logliks: list = field(default_factory=list)


def em_fit_segment(excitation: np.ndarray, y: np.ndarray,
                   window: tuple, init: StateSpaceParams,
                   iterations: int, block: int | None = None) -> SegmentFit:
    """Learn parameters on one window and smooth it once more.

    Runs ``iterations`` EM iterations starting from ``init``, then a final
    forward/backward smoothing with the learned parameters; only that last
    smoothing produces the returned estimates.  ``iterations=0`` is plain
    Kalman smoothing under ``init``.
    """
    if iterations < 0:
        raise ConfigError("iterations must be non-negative")
    start, stop = window
    y = np.asarray(y, dtype=np.float64)
    if not 0 <= start < stop <= y.shape[0]:
        raise ConfigError("window out of range")
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    channels = excitation.shape[0]
    if init.dim % channels != 0:
        raise ConfigError("state dimension not a multiple of channel count")
    taps = init.dim // channels
    regressors = stacked_regressors(excitation, taps, start, stop)
    y_seg = y[start:stop]
    if iterations > 0 and y_seg.shape[0] < 2:
        raise ConfigError("EM needs at least a two-sample window")

    params = init
    logliks = []
    for it in range(iterations):
        try:
            fwd = forward_pass(params, regressors, y_seg, block)
            logliks.append(fwd.loglik)
            _, stats = backward_pass(params, regressors, y_seg, fwd,
                                     accumulate=True)
            params = em_mstep(stats)
        except NumericalFailureError as err:
            raise NumericalFailureError(
                f"EM iteration {it + 1}: {err}") from err
    try:
        fwd = forward_pass(params, regressors, y_seg, block)
        logliks.append(fwd.loglik)
        mu_hat, _ = backward_pass(params, regressors, y_seg, fwd,
                                  accumulate=False)
    except NumericalFailureError as err:
        raise NumericalFailureError(f"final smoothing: {err}") from err
    return SegmentFit(params=params, estimates=mu_hat, logliks=logliks)
