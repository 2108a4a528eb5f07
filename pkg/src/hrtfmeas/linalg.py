"""Symmetric linear-algebra helpers used by the state-space recursions.

All inversions in the toolkit go through :func:`sym_solve`, which factorizes
via Cholesky and escalates a diagonal jitter (relative to the mean diagonal
scale) before giving up.  This keeps failure behaviour uniform and makes the
recursions deterministic: the same inputs always take the same code path.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import NumericalFailureError

# Jitter escalation ladder, as fractions of trace(M)/n.
_JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-8)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part ``(m + m.T) / 2``."""
    return (m + m.T) * 0.5


def sym_solve(m: np.ndarray, rhs: np.ndarray, context: str = "") -> np.ndarray:
    """Solve ``m @ x = rhs`` for symmetric positive definite ``m``.

    Tries a Cholesky factorization; on failure adds an escalating diagonal
    jitter (1e-12 to 1e-8 of the mean diagonal) before raising
    :class:`NumericalFailureError`.
    """
    scale = np.trace(m) / m.shape[0]
    if not np.isfinite(scale):
        raise NumericalFailureError(
            f"non-finite matrix in symmetric solve{_ctx(context)}")
    if scale <= 0.0:
        scale = 1.0
    rhs2d = rhs if rhs.ndim == 2 else rhs[:, None]
    for eps in _JITTER_STEPS:
        mj = m if eps == 0.0 else m + (eps * scale) * np.eye(m.shape[0])
        c, info = lapack.dpotrf(mj, lower=1)
        if info != 0:
            continue
        x, info = lapack.dpotrs(c, rhs2d, lower=1)
        if info == 0:
            return x if rhs.ndim == 2 else x[:, 0]
    raise NumericalFailureError(
        f"matrix not positive definite after jitter escalation{_ctx(context)}")


def chol_lower(m: np.ndarray, context: str = "") -> np.ndarray:
    """Lower Cholesky factor with the same jitter ladder as :func:`sym_solve`."""
    scale = np.trace(m) / m.shape[0]
    if scale <= 0.0 or not np.isfinite(scale):
        scale = 1.0
    for eps in _JITTER_STEPS:
        mj = m if eps == 0.0 else m + (eps * scale) * np.eye(m.shape[0])
        c, info = lapack.dpotrf(mj, lower=1)
        if info == 0:
            return np.tril(c)
    raise NumericalFailureError(
        f"Cholesky failed after jitter escalation{_ctx(context)}")


def make_psd(m: np.ndarray, jitter: float = 1e-12) -> np.ndarray:
    """Repair a nominally-PSD matrix: symmetrize, and only if it fails a
    Cholesky probe, clip negative eigenvalues to zero and add ``jitter``
    (scaled by the mean diagonal) back on the diagonal.

    Healthy matrices pass through with nothing but symmetrization, so exact
    EM updates stay exact.
    """
    sym = symmetrize(m)
    _, info = lapack.dpotrf(sym, lower=1)
    if info == 0:
        return sym
    w, q = np.linalg.eigh(sym)
    if w[-1] <= 0.0:
        scale = 1.0
    else:
        scale = w[-1]
    w = np.clip(w, 0.0, None)
    repaired = (q * w) @ q.T
    return symmetrize(repaired) + (jitter * scale) * np.eye(m.shape[0])


def _ctx(context: str) -> str:
    return f" ({context})" if context else ""
