"""Analytic rigid-sphere transfer functions and reference impulse responses.

The transfer function of a rigid sphere for a point source at finite range is
evaluated with the classic recursive series (spherical-Hankel ratios via
upward recurrences, Legendre polynomials via their three-term recurrence).
Responses are free-field normalized: the on-sphere pressure is divided by the
pressure that the source would produce at the sphere-center position in free
field, so the 1/r attenuation and the straight-line propagation delay are
removed from the gain.  :func:`synthesize_hrir` re-applies the propagation
delay as an exact linear-phase term when building reference impulse
responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, NumericalFailureError

#: Consecutive relatively-negligible series terms required before a frequency
#: bin is considered converged.
_CONVERGED_RUN = 20
#: Relative contribution below which a term counts as negligible.
_TERM_TOL = 1e-12


@dataclass(frozen=True)
class SphereConfig:
    """Geometry and synthesis settings for the spherical-head model.

    ``band_limit`` is the fraction of Nyquist at which a cosine-squared
    roll-off to zero begins.  The roll-off keeps the synthesized impulse
    responses time-concentrated (the exact fractional-delay phase would
    otherwise leak energy into late taps and violate ``truncation_tail``);
    it only attenuates the top of the band and leaves everything below
    ``band_limit * nyquist`` untouched.
    """

    radius: float = 0.0875
    speed_of_sound: float = 343.0
    sample_rate: float = 24000.0
    source_distance: float = 1.5
    ear_azimuth: float = 90.0
    ear_elevation: float = 0.0
    ref_length: int = 315
    synthesis_fft_size: int = 1024
    band_limit: float = 0.85
    truncation_tail: float = 1e-8
    support_taps: int = 192
    support_fade_taps: int = 28
    max_order: int = 400

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ConfigError("sphere radius must be positive")
        if self.source_distance <= self.radius:
            raise ConfigError("source_distance must exceed the sphere radius")
        if self.sample_rate <= 0.0:
            raise ConfigError("sample_rate must be positive")
        if self.ref_length < 1:
            raise ConfigError("ref_length must be at least 1")
        if self.synthesis_fft_size < 2 * self.ref_length:
            raise ConfigError(
                "synthesis_fft_size must be at least twice ref_length")
        if not 0.0 < self.band_limit <= 1.0:
            raise ConfigError("band_limit must lie in (0, 1]")
        if self.support_taps < 1:
            raise ConfigError("support_taps must be at least 1")
        if not 0 <= self.support_fade_taps <= self.support_taps:
            raise ConfigError(
                "support_fade_taps must lie in [0, support_taps]")
        if self.max_order < 2:
            raise ConfigError("max_order must be at least 2")


@dataclass
class HRIR:
    """A finite impulse response with its sample rate and source channel."""

    taps: np.ndarray
    sample_rate: float
    channel: int | None = None

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1:
            raise ConfigError("HRIR taps must be a 1-D vector")
        if not np.all(np.isfinite(self.taps)):
            raise ConfigError("HRIR taps must be finite")

    def __len__(self) -> int:
        return self.taps.shape[0]


def incidence_angle(source_az: float, source_el: float,
                    ear_az: float, ear_el: float) -> float:
    """Central angle in degrees between two directions on the unit sphere."""
    saz, sel = math.radians(source_az), math.radians(source_el)
    eaz, eel = math.radians(ear_az), math.radians(ear_el)
    c = (math.sin(sel) * math.sin(eel)
         + math.cos(sel) * math.cos(eel) * math.cos(saz - eaz))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def fold_incidence(angle: float) -> float:
    """Fold an arbitrary angle to the axially-symmetric range [0, 180]."""
    return abs(((angle + 180.0) % 360.0) - 180.0)


def sphere_transfer(config: SphereConfig, frequency: float,
                    incidence: float) -> complex:
    """Free-field-normalized transfer function at one frequency and incidence.

    Returns exactly ``1 + 0j`` at DC.  Raises
    :class:`NumericalFailureError` if the series has not converged after
    ``config.max_order`` terms.
    """
    if frequency < 0.0 or frequency > config.sample_rate / 2.0:
        raise ConfigError("frequency must lie in [0, sample_rate / 2]")
    out = _transfer_bins(config, np.array([frequency]), incidence)
    return complex(out[0])


def _dc_limit(config: SphereConfig, incidence: float) -> float:
    """Zero-frequency limit of the normalized surface pressure.

    At finite range the incompressible-flow limit is
    ``sum_m ((2m+1)/(m+1)) (a/r)^m P_m(cos theta)``, not unity; the gains are
    equalized by this value so the response is exactly 1 at DC and the
    spectrum stays smooth through zero frequency.
    """
    x = math.cos(math.radians(fold_incidence(incidence)))
    ratio = config.radius / config.source_distance
    total = 0.0
    p2, p1 = 1.0, x
    power = 1.0
    run = 0
    for m in range(0, 10000):
        if m == 0:
            p = 1.0
        elif m == 1:
            p = x
        else:
            p = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p2) / m
            p2, p1 = p1, p
        term = (2.0 * m + 1.0) / (m + 1.0) * power * p
        total += term
        # Legendre values oscillate (odd orders vanish broadside), so demand
        # a run of negligible terms before declaring convergence.
        run = run + 1 if abs(term) <= 1e-16 * abs(total) else 0
        if run >= 5:
            return total
        power *= ratio
    raise NumericalFailureError("zero-frequency limit did not converge")


def _transfer_bins(config: SphereConfig, freqs: np.ndarray,
                   incidence: float) -> np.ndarray:
    """Series evaluation on a vector of frequencies at a fixed incidence.

    Each bin is truncated adaptively: once ``_CONVERGED_RUN`` consecutive
    terms contribute less than ``_TERM_TOL`` relative to the partial sum, the
    bin is frozen and contributes nothing further.  This keeps the unstable
    growth of the small-argument Hankel recurrences away from converged bins.
    """
    theta = fold_incidence(incidence)
    x = math.cos(math.radians(theta))
    a = config.radius
    rho = config.source_distance / a
    mu = 2.0 * np.pi * np.asarray(freqs, dtype=np.float64) * a / config.speed_of_sound

    out = np.ones(mu.shape, dtype=np.complex128)
    nz = mu > 0.0
    if not np.any(nz):
        return out
    mu = mu[nz]

    za = 1.0 / (1j * mu)
    zr = 1.0 / (1j * mu * rho)
    qa2, qa1 = za.copy(), za * (1.0 - za)
    qr2, qr1 = zr.copy(), zr * (1.0 - zr)
    p2, p1 = 1.0, x

    total = zr / (za * (za - 1.0))
    term = (3.0 * x * zr * (zr - 1.0)) / (za * (2.0 * za ** 2 - 2.0 * za + 1.0))
    total = total + term

    active = np.ones(mu.shape, dtype=bool)
    run = np.zeros(mu.shape, dtype=np.int64)
    for m in range(2, config.max_order + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            qr = -(2.0 * m - 1.0) * zr * qr1 + qr2
            qa = -(2.0 * m - 1.0) * za * qa1 + qa2
            p = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p2) / m
            term = ((2.0 * m + 1.0) * p * qr) / ((m + 1.0) * za * qa - qa1)
        total = total + np.where(active, term, 0.0)
        small = np.abs(term) <= _TERM_TOL * np.abs(total)
        run = np.where(active & small, run + 1, 0)
        active &= run < _CONVERGED_RUN
        if not active.any():
            break
        qr2, qr1 = qr1, qr
        qa2, qa1 = qa1, qa
        p2, p1 = p1, p
    if active.any():
        raise NumericalFailureError(
            f"sphere series did not converge within order {config.max_order} "
            f"({int(active.sum())} bins still active)")

    # The recursion evaluates the series in the exp(-i w t) convention;
    # conjugate so that a delay is exp(-i w tau) under numpy's FFT synthesis.
    # Dividing by the DC limit makes the response exactly unity at zero
    # frequency and keeps the sampled spectrum smooth through DC.
    h = rho * np.exp(-1j * mu) * total / (1j * mu)
    out[nz] = np.conj(h) / _dc_limit(config, incidence)
    return out


def _band_taper(freqs: np.ndarray, config: SphereConfig) -> np.ndarray:
    nyq = config.sample_rate / 2.0
    start = config.band_limit * nyq
    w = np.ones(freqs.shape)
    if config.band_limit >= 1.0:
        return w
    hi = freqs >= start
    w[hi] = np.cos(0.5 * np.pi * (freqs[hi] - start) / (nyq - start)) ** 2
    return w


def synthesize_hrir(config: SphereConfig, incidence: float) -> HRIR:
    """Reference impulse response of ``config.ref_length`` taps at one incidence.

    Samples the transfer function on the synthesis FFT grid, applies the
    band-edge taper and the exact linear-phase propagation delay
    ``source_distance / speed_of_sound``, enforces conjugate symmetry and
    inverse-transforms.  The result is faded to zero over the last
    ``support_fade_taps`` taps before ``support_taps`` so that references are
    exactly representable by an estimator of that many taps; the discarded
    energy sits below -75 dB and is bounded by the ``truncation_tail`` guard
    on the raw response.  Deterministic: identical inputs give bit-identical
    taps.
    """
    nfft = config.synthesis_fft_size
    freqs = np.fft.rfftfreq(nfft, d=1.0 / config.sample_rate)
    gain = _transfer_bins(config, freqs, incidence)
    gain = gain * _band_taper(freqs, config)
    tau = config.source_distance / config.speed_of_sound
    gain = gain * np.exp(-2j * np.pi * freqs * tau)
    gain[0] = gain[0].real
    gain[-1] = gain[-1].real
    spectrum = np.concatenate([gain, np.conj(gain[-2:0:-1])])
    response = np.fft.ifft(spectrum)
    peak = np.max(np.abs(response.real))
    if peak > 0 and np.max(np.abs(response.imag)) > 1e-12 * peak:
        raise NumericalFailureError(
            "inverse transform produced a non-real impulse response")
    raw = response.real
    total = float(np.dot(raw, raw))
    support = min(config.support_taps, config.ref_length)
    tail = float(np.dot(raw[support:], raw[support:]))
    if total > 0.0 and tail > config.truncation_tail * total:
        raise ConfigError(
            f"limiting the response to {support} taps discards a fraction "
            f"{tail / total:.3e} of the energy (> {config.truncation_tail:.1e}); "
            "increase ref_length/support_taps or synthesis_fft_size")
    taps = raw[:config.ref_length].copy()
    fade = min(config.support_fade_taps, support)
    if fade > 0:
        lo = support - fade
        ramp = np.cos(0.5 * np.pi * np.arange(fade) / fade) ** 2
        taps[lo:support] *= ramp
    taps[support:] = 0.0
    return HRIR(taps, config.sample_rate)


#: Incidence angles are quantized to this many degrees before cache lookup;
#: far below any per-sample rotation increment yet bounding the cache keys.
ANGLE_QUANTUM = 1e-4


def quantize_angle(angle: float) -> float:
    """Snap an incidence angle to the cache grid (1e-4 degree steps)."""
    return round(fold_incidence(angle) / ANGLE_QUANTUM) * ANGLE_QUANTUM


@dataclass
class HrirGrid:
    """Angle-keyed cache of reference impulse responses.

    Reads are cheap dictionary hits; uncached angles are synthesized on
    demand.  ``computations`` counts actual synthesis calls, which makes the
    caching observable in tests.
    """

    config: SphereConfig
    _cache: dict = field(default_factory=dict, repr=False)
    computations: int = 0

    def __init__(self, config: SphereConfig,
                 angles: Iterable[float] = ()):  # noqa: D107 - dataclass-like
        self.config = config
        self._cache = {}
        self.computations = 0
        self.prefill(angles)

    def get(self, angle: float) -> HRIR:
        key = quantize_angle(angle)
        hit = self._cache.get(key)
        if hit is None:
            hit = synthesize_hrir(self.config, key)
            self._cache[key] = hit
            self.computations += 1
        return hit

    def store(self, angle: float, hrir: HRIR) -> None:
        """Insert an externally synthesized response (pooled warm-up)."""
        self._cache[quantize_angle(angle)] = hrir

    def prefill(self, angles: Iterable[float]) -> None:
        for angle in angles:
            self.get(angle)

    def __len__(self) -> int:
        return len(self._cache)
