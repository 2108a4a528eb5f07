"""Memory-bounded forward/backward engine for long segments.

Smoothing a segment needs every filtered covariance in backward order.
Storing them all costs ``N n^2`` doubles (gigabytes for multi-channel
state dimensions), so the forward pass here keeps only block-boundary
checkpoints and the backward sweep re-runs the filter one block at a time.
Because the backward recursion has to rebuild the propagated covariances
``A V_k`` and the a-priori ``P_{k+1}`` anyway, the recomputation adds no
extra matrix products; results are bit-identical to the array-storing path
(the same step kernels run on the same values in the same order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..linalg import symmetrize
from .kalman import filter_step, is_identity, predict_cov, rts_step
from .params import StateSpaceParams, StatsAccumulator, SufficientStats

_LOG_2PI = math.log(2.0 * math.pi)


def default_block(count: int) -> int:
    """Checkpoint interval balancing checkpoint and block-buffer memory."""
    return max(8, int(round(math.sqrt(count / 3.0))))


@dataclass
class CheckpointForward:
    """Forward pass storing means, innovations and block checkpoints only."""

    mu: np.ndarray               # (N, n)
    innovations: np.ndarray      # (N,)
    innovation_vars: np.ndarray  # (N,)
    loglik: float
    checkpoints: list            # V entering each block (None for the first)
    block: int
    final_mu: np.ndarray
    final_v: np.ndarray


def forward_pass(params: StateSpaceParams, regressors: np.ndarray,
                 y: np.ndarray, block: int | None = None) -> CheckpointForward:
    """Filter the segment, checkpointing the posterior covariance every
    ``block`` steps."""
    count, n = regressors.shape
    if y.shape[0] != count:
        raise ConfigError("regressors and observations must align")
    if block is None:
        block = default_block(count)
    identity_a = is_identity(params.A)

    mu = np.empty((count, n))
    innovations = np.empty(count)
    innovation_vars = np.empty(count)
    loglik = 0.0
    checkpoints = []
    mu_prev = v_prev = None
    for k in range(count):
        if k % block == 0:
            checkpoints.append(None if k == 0 else v_prev.copy())
        if k == 0:
            pred_mu = params.mu0
            p = symmetrize(params.p0)
        else:
            pred_mu = mu_prev if identity_a else params.A @ mu_prev
            p = predict_cov(params.A, v_prev, params.gamma, identity_a)
        mu_k, v_k, _, e_k, r_k = filter_step(pred_mu, p, regressors[k],
                                             y[k], params.sigma)
        loglik += -0.5 * (_LOG_2PI + math.log(r_k) + e_k * e_k / r_k)
        mu[k] = mu_k
        innovations[k] = e_k
        innovation_vars[k] = r_k
        mu_prev, v_prev = mu_k, v_k
    return CheckpointForward(mu=mu, innovations=innovations,
                             innovation_vars=innovation_vars, loglik=loglik,
                             checkpoints=checkpoints, block=block,
                             final_mu=mu_prev, final_v=v_prev)


def _recompute_block(params: StateSpaceParams, regressors: np.ndarray,
                     y: np.ndarray, fwd: CheckpointForward, b0: int, b1: int,
                     identity_a: bool):
    """Re-run the filter over [b0, b1); returns per-step posterior V,
    a-priori P and propagated posterior ``m1 = A V_{k-1}`` buffers."""
    size = b1 - b0
    v_buf = [None] * size
    p_buf = [None] * size
    m1_buf = [None] * size
    v_prev = fwd.checkpoints[b0 // fwd.block]
    for i in range(size):
        k = b0 + i
        if k == 0:
            pred_mu = params.mu0
            p = symmetrize(params.p0)
            m1 = None
        else:
            m1 = v_prev if identity_a else params.A @ v_prev
            if identity_a:
                p = symmetrize(v_prev + params.gamma)
            else:
                p = symmetrize(m1 @ params.A.T + params.gamma)
            pred_mu = fwd.mu[k - 1] if identity_a else params.A @ fwd.mu[k - 1]
        _, v_k, _, _, _ = filter_step(pred_mu, p, regressors[k], y[k],
                                      params.sigma)
        v_buf[i], p_buf[i], m1_buf[i] = v_k, p, m1
        v_prev = v_k
    return v_buf, p_buf, m1_buf


def backward_pass(params: StateSpaceParams, regressors: np.ndarray,
                  y: np.ndarray, fwd: CheckpointForward,
                  accumulate: bool = True):
    """Smooth the checkpointed forward pass.

    Returns ``(mu_hat, stats)``; ``stats`` is None when ``accumulate`` is
    False (means-only mode, used for the final smoothing whose moments are
    never consumed).
    """
    count, n = fwd.mu.shape
    identity_a = is_identity(params.A)
    mu_hat = np.empty_like(fwd.mu)
    mu_hat[-1] = fwd.mu[-1]
    v_hat_next = fwd.final_v
    acc = None
    if accumulate:
        acc = StatsAccumulator(n)
        acc.add_sample(regressors[-1], y[-1], mu_hat[-1], v_hat_next)

    block = fwd.block
    n_blocks = (count + block - 1) // block
    pending_p = pending_m1 = None
    for j in range(n_blocks - 1, -1, -1):
        b0, b1 = j * block, min((j + 1) * block, count)
        v_buf, p_buf, m1_buf = _recompute_block(
            params, regressors, y, fwd, b0, b1, identity_a)
        top = b1 - 2 if j == n_blocks - 1 else b1 - 1
        for k in range(top, b0 - 1, -1):
            i = k - b0
            if k + 1 < b1:
                p_next, m1_next = p_buf[i + 1], m1_buf[i + 1]
            else:
                p_next, m1_next = pending_p, pending_m1
            pred_mu_next = fwd.mu[k] if identity_a else params.A @ fwd.mu[k]
            mu_hat_k, v_hat_k, cross, _ = rts_step(
                fwd.mu[k], v_buf[i], mu_hat[k + 1], v_hat_next, p_next,
                m1_next, pred_mu_next, means_only=not accumulate)
            mu_hat[k] = mu_hat_k
            if accumulate:
                acc.add_sample(regressors[k], y[k], mu_hat_k, v_hat_k)
                acc.add_cross(cross)
                v_hat_next = v_hat_k
        pending_p, pending_m1 = p_buf[0], m1_buf[0]

    stats = acc.finalize() if acc is not None else None
    return mu_hat, stats
