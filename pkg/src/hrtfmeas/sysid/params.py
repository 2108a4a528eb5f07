"""Parameter and sufficient-statistic containers for the state-space model.

The model: the stacked impulse-response vector z_k (dimension
``sources * taps``) evolves as ``z_k = A z_{k-1} + q_k`` with process noise
covariance ``gamma``; the scalar observation is ``y_k = x_k' z_k + n_k``
with measurement noise variance ``sigma``; the initial state is Gaussian
with mean ``mu0`` and covariance ``p0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

#: Relative symmetry / positive-semidefiniteness tolerance for covariances.
SYM_TOL = 1e-10


@dataclass
class StateSpaceParams:
    """Learnable parameter set of one segment: {A, gamma, sigma, mu0, p0}."""

    A: np.ndarray
    gamma: np.ndarray
    sigma: float
    mu0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.mu0 = np.asarray(self.mu0, dtype=np.float64)
        self.p0 = np.asarray(self.p0, dtype=np.float64)
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.gamma.shape != (n, n) \
                or self.p0.shape != (n, n) or self.mu0.shape != (n,):
            raise ConfigError("inconsistent state-space parameter shapes")
        if not self.sigma > 0.0:
            raise ConfigError("sigma (measurement noise variance) must be > 0")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @classmethod
    def identity_init(cls, dim: int, gamma_scale: float = 1e-7,
                      sigma: float = 0.01,
                      p0_scale: float = 1.0) -> "StateSpaceParams":
        """The default initialization: A = I, gamma = gamma_scale * I,
        mu0 = 0, p0 = p0_scale * I."""
        return cls(A=np.eye(dim), gamma=gamma_scale * np.eye(dim),
                   sigma=sigma, mu0=np.zeros(dim), p0=p0_scale * np.eye(dim))

    def validate(self) -> None:
        """Full invariant check (symmetry and PSD within SYM_TOL * trace)."""
        for name, m in (("gamma", self.gamma), ("p0", self.p0)):
            scale = max(abs(np.trace(m)), 1.0)
            if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
                raise ConfigError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(m)[0] < -SYM_TOL * scale:
                raise ConfigError(f"{name} is not positive semidefinite")


@dataclass
class SufficientStats:
    """Smoothed second-moment sums needed by the closed-form updates.

    ``s_zz = sum_{k=2..N} E[z_k z_k']``, ``s_z1 = sum E[z_k z_{k-1}']``,
    ``s_11 = sum E[z_{k-1} z_{k-1}']`` plus the scalar observation sums for
    the measurement-noise update and the smoothed initial moments.
    """

    s_zz: np.ndarray
    s_z1: np.ndarray
    s_11: np.ndarray
    sum_yy: float
    sum_y_cmu: float
    sum_quad: float
    mu1: np.ndarray
    v1: np.ndarray
    count: int


class StatsAccumulator:
    """Folds smoothed moments into sums during a backward sweep so the
    per-sample covariances never need to be retained."""

    def __init__(self, dim: int):
        self._s_all = np.zeros((dim, dim))
        self._s_z1 = np.zeros((dim, dim))
        self.sum_yy = 0.0
        self.sum_y_cmu = 0.0
        self.sum_quad = 0.0
        self._first = None
        self._last = None
        self._count = 0

    def add_sample(self, x: np.ndarray, yk: float, mu_hat: np.ndarray,
                   v_hat: np.ndarray) -> None:
        """Fold one smoothed sample (runs from the last index downward)."""
        second = v_hat + np.outer(mu_hat, mu_hat)
        self._s_all += second
        cmu = float(x @ mu_hat)
        self.sum_yy += float(yk) * float(yk)
        self.sum_y_cmu += float(yk) * cmu
        self.sum_quad += float(x @ v_hat @ x) + cmu * cmu
        if self._last is None:
            self._last = second.copy()
        self._first = (mu_hat, v_hat, second)
        self._count += 1

    def add_cross(self, cross: np.ndarray) -> None:
        """Fold one lagged moment E[z_{k+1} z_k']."""
        self._s_z1 += cross

    def finalize(self) -> SufficientStats:
        if self._count < 2:
            raise ConfigError("at least two samples required for statistics")
        mu1, v1, first_second = self._first
        return SufficientStats(
            s_zz=self._s_all - first_second,
            s_z1=self._s_z1,
            s_11=self._s_all - self._last,
            sum_yy=self.sum_yy,
            sum_y_cmu=self.sum_y_cmu,
            sum_quad=self.sum_quad,
            mu1=mu1.copy(),
            v1=v1.copy(),
            count=self._count)
