"""Kalman filter / RTS smoother with a rank-1 observation.

The observation row is a regressor of excitation samples, so the innovation
variance is scalar and the gain needs no matrix inversion.  The smoother's
single symmetric solve per step goes through :func:`sym_solve`.

Step kernels (:func:`predict_cov`, :func:`filter_step`, :func:`rts_step`)
are shared with the memory-bounded segment engine so both paths produce
bit-identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, NumericalFailureError
from ..linalg import sym_solve, symmetrize
from .params import StateSpaceParams, StatsAccumulator, SufficientStats

_LOG_2PI = math.log(2.0 * math.pi)


def stacked_regressors(excitation: np.ndarray, taps: int, start: int = 0,
                       stop: int | None = None) -> np.ndarray:
    """Observation rows for samples [start, stop).

    Row k holds, per channel, the ``taps`` most recent excitation samples in
    descending-lag order; samples before the signal start count as zero.
    Returns a C-contiguous (stop-start, channels*taps) array.
    """
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    channels, total = excitation.shape
    stop = total if stop is None else stop
    if not 0 <= start < stop <= total:
        raise ConfigError("regressor range out of bounds")
    out = np.empty((stop - start, channels * taps))
    for s in range(channels):
        padded = np.concatenate([np.zeros(taps - 1), excitation[s]])
        view = sliding_window_view(padded, taps)[start:stop, ::-1]
        out[:, s * taps:(s + 1) * taps] = view
    return out


def is_identity(m: np.ndarray) -> bool:
    return np.array_equal(m, np.eye(m.shape[0]))


def predict_cov(a: np.ndarray, v: np.ndarray, gamma: np.ndarray,
                identity_a: bool) -> np.ndarray:
    """A-priori covariance ``A V A' + gamma``, symmetrized."""
    if identity_a:
        return symmetrize(v + gamma)
    return symmetrize(a @ v @ a.T + gamma)


def filter_step(pred_mu: np.ndarray, p: np.ndarray, x: np.ndarray,
                yk: float, sigma: float):
    """One measurement update.  Returns (mu, v, gain, innovation, innov_var).

    The innovation variance ``x' P x + sigma`` is scalar, so the gain is a
    plain vector scale: no matrix inversion appears in the filter.
    """
    u = p @ x
    r = float(x @ u) + sigma
    if not r > 0.0 or not math.isfinite(r):
        raise NumericalFailureError(
            f"non-positive innovation variance ({r!r})")
    e = float(yk) - float(x @ pred_mu)
    k = u / r
    mu = pred_mu + k * e
    v = symmetrize(p - np.outer(k, u))
    return mu, v, k, e, r


def rts_step(mu_k, v_k, mu_hat_next, v_hat_next, p_next, m1, pred_mu_next,
             means_only: bool):
    """One backward smoother update.

    ``p_next`` is the a-priori covariance of step k+1 and ``m1 = A V_k`` its
    propagated posterior, so the smoother gain is ``J = m1' p_next^{-1}``.
    Returns (mu_hat, v_hat, cross) where ``cross = E[z_{k+1} z_k']``;
    v_hat and cross are None when ``means_only``.
    """
    j = sym_solve(p_next, m1, context="smoother gain").T
    mu_hat = mu_k + j @ (mu_hat_next - pred_mu_next)
    if means_only:
        return mu_hat, None, None, j
    v_hat = symmetrize(v_k + j @ (v_hat_next - p_next) @ j.T)
    cross = v_hat_next @ j.T + np.outer(mu_hat_next, mu_hat)
    return mu_hat, v_hat, cross, j


@dataclass
class FilterPass:
    """Forward-pass record over one sample range.

    ``p`` holds the a-priori covariance used at each step (``p[0]`` is the
    initial covariance) and ``v`` the a-posteriori covariance.
    """

    mu: np.ndarray                  # (N, n)
    v: np.ndarray | None            # (N, n, n)
    p: np.ndarray | None            # (N, n, n)
    gain: np.ndarray | None         # (N, n)
    innovations: np.ndarray         # (N,)
    innovation_vars: np.ndarray     # (N,)
    loglik: float
    regressors: np.ndarray          # (N, n)
    y: np.ndarray                   # (N,)
    params: StateSpaceParams
    final_mu: np.ndarray | None = None
    final_v: np.ndarray | None = None
    carry_in: tuple | None = None

    @property
    def samples(self) -> int:
        return self.mu.shape[0]

    @property
    def final_state(self) -> tuple:
        return self.final_mu, self.final_v


@dataclass
class SmoothPass:
    """Backward-pass result; covariance-sized fields depend on the mode."""

    mu_hat: np.ndarray                    # (N, n)
    v_hat: np.ndarray | None = None       # (N, n, n), mode="full"
    gains: np.ndarray | None = None       # (N-1, n, n), mode="full"
    stats: SufficientStats | None = None  # modes "full" and "accumulate"


def kalman_forward(params: StateSpaceParams, excitation: np.ndarray,
                   y: np.ndarray, start: int = 0, stop: int | None = None,
                   carry: tuple | None = None,
                   store: str = "full") -> FilterPass:
    """Run the filter over samples [start, stop).

    Without ``carry`` the first step uses the initial state (mean ``mu0``,
    a-priori covariance ``p0``) as its prediction; with ``carry`` (a
    ``(mu, v)`` pair from a previous range) the recursion continues
    seamlessly, so splitting a range keeps the log-likelihood additive.
    ``store`` is "full" (keep per-step covariances) or "means".
    """
    y = np.asarray(y, dtype=np.float64)
    stop = y.shape[0] if stop is None else stop
    n = params.dim
    excitation = np.atleast_2d(np.asarray(excitation, dtype=np.float64))
    channels = excitation.shape[0]
    if n % channels != 0:
        raise ConfigError("state dimension not a multiple of channel count")
    taps = n // channels
    regressors = stacked_regressors(excitation, taps, start, stop)
    y_seg = y[start:stop]

    count = stop - start
    identity_a = is_identity(params.A)
    mu = np.empty((count, n))
    v = np.empty((count, n, n)) if store == "full" else None
    p_store = np.empty((count, n, n)) if store == "full" else None
    gains = np.empty((count, n)) if store == "full" else None
    innovations = np.empty(count)
    innovation_vars = np.empty(count)
    loglik = 0.0

    mu_prev = v_prev = None
    if carry is not None:
        mu_prev, v_prev = carry
    for i in range(count):
        if i == 0 and carry is None:
            pred_mu = params.mu0
            p = symmetrize(params.p0)
        else:
            pred_mu = mu_prev if identity_a else params.A @ mu_prev
            p = predict_cov(params.A, v_prev, params.gamma, identity_a)
        x = regressors[i]
        mu_i, v_i, k_i, e_i, r_i = filter_step(pred_mu, p, x, y_seg[i],
                                               params.sigma)
        loglik += -0.5 * (_LOG_2PI + math.log(r_i) + e_i * e_i / r_i)
        mu[i] = mu_i
        innovations[i] = e_i
        innovation_vars[i] = r_i
        if store == "full":
            v[i] = v_i
            p_store[i] = p
            gains[i] = k_i
        mu_prev, v_prev = mu_i, v_i

    return FilterPass(mu=mu, v=v, p=p_store, gain=gains,
                      innovations=innovations,
                      innovation_vars=innovation_vars,
                      loglik=loglik, regressors=regressors, y=y_seg,
                      params=params, final_mu=mu_prev, final_v=v_prev,
                      carry_in=carry)


def kalman_backward(params: StateSpaceParams, fp: FilterPass,
                    mode: str = "full") -> SmoothPass:
    """Smooth a stored forward pass from its last sample to its first.

    Modes: "full" keeps every smoothed covariance and smoother gain and
    derives the sufficient statistics from them afterwards; "accumulate"
    folds the statistics during the sweep and retains only the smoothed
    means; "means" skips moments entirely.
    """
    if mode not in ("full", "accumulate", "means"):
        raise ConfigError(f"unknown smoother mode {mode!r}")
    if fp.v is None:
        raise ConfigError("forward pass must store covariances for smoothing")
    count, n = fp.mu.shape
    identity_a = is_identity(params.A)

    mu_hat = np.empty_like(fp.mu)
    mu_hat[-1] = fp.mu[-1]
    v_hat_next = fp.v[-1]
    v_hat_store = gain_store = None
    if mode == "full":
        v_hat_store = np.empty((count, n, n))
        v_hat_store[-1] = v_hat_next
        gain_store = np.empty((count - 1, n, n)) if count > 1 else None

    acc = None
    if mode == "accumulate":
        acc = StatsAccumulator(n)
        acc.add_sample(fp.regressors[-1], fp.y[-1], mu_hat[-1], v_hat_next)

    means_only = mode == "means"
    for k in range(count - 2, -1, -1):
        v_k = fp.v[k]
        p_next = fp.p[k + 1]
        m1 = v_k if identity_a else params.A @ v_k
        pred_mu_next = fp.mu[k] if identity_a else params.A @ fp.mu[k]
        mu_hat_k, v_hat_k, cross, j = rts_step(
            fp.mu[k], v_k, mu_hat[k + 1], v_hat_next, p_next, m1,
            pred_mu_next, means_only)
        mu_hat[k] = mu_hat_k
        if mode == "full":
            v_hat_store[k] = v_hat_k
            gain_store[k] = j
        if acc is not None:
            acc.add_sample(fp.regressors[k], fp.y[k], mu_hat_k, v_hat_k)
            acc.add_cross(cross)
        if not means_only:
            v_hat_next = v_hat_k

    if mode == "full":
        stats = stats_from_full(fp, mu_hat, v_hat_store, gain_store)
        return SmoothPass(mu_hat=mu_hat, v_hat=v_hat_store,
                          gains=gain_store, stats=stats)
    if mode == "accumulate":
        return SmoothPass(mu_hat=mu_hat, stats=acc.finalize())
    return SmoothPass(mu_hat=mu_hat)


def stats_from_full(fp: FilterPass, mu_hat: np.ndarray, v_hat: np.ndarray,
                    gains: np.ndarray | None) -> SufficientStats:
    """Sufficient statistics assembled from retained smoothed moments.

    Vectorized ascending-order evaluation; an independent summation path
    from the accumulate mode (useful as a cross-check of both).
    """
    count = fp.samples
    if count < 2:
        raise ConfigError("at least two samples required for statistics")
    second = v_hat + np.einsum("ki,kj->kij", mu_hat, mu_hat)
    s_all = second.sum(axis=0)
    cross = (np.einsum("kij,kmj->kim", v_hat[1:], gains)
             + np.einsum("ki,kj->kij", mu_hat[1:], mu_hat[:-1]))
    cmu = np.einsum("ki,ki->k", fp.regressors, mu_hat)
    quad = np.einsum("ki,kij,kj->k", fp.regressors, v_hat, fp.regressors)
    return SufficientStats(
        s_zz=s_all - second[0],
        s_z1=cross.sum(axis=0),
        s_11=s_all - second[-1],
        sum_yy=float(np.dot(fp.y, fp.y)),
        sum_y_cmu=float(np.dot(fp.y, cmu)),
        sum_quad=float(np.sum(quad + cmu * cmu)),
        mu1=mu_hat[0].copy(),
        v1=v_hat[0].copy(),
        count=count)


def log_likelihood(params: StateSpaceParams, excitation: np.ndarray,
                   y: np.ndarray, start: int = 0, stop: int | None = None,
                   carry: tuple | None = None) -> float:
    """Prediction-error log-likelihood of the observations in the range."""
    fp = kalman_forward(params, excitation, y, start, stop, carry,
                        store="means")
    return fp.loglik
