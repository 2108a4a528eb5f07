"""Time-variant MISO measurement simulation.

The microphone signal of a continuous measurement is the per-sample
convolution of the excitation with the reference impulse response for the
momentary head orientation, summed over loudspeakers, plus white measurement
noise.  The exact per-sample references used are kept in the output so that
evaluation never re-derives them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .excitation import ExcitationSignal
from .sphere import ANGLE_QUANTUM, HrirGrid, SphereConfig, fold_incidence

#: Default per-source elevations, degrees: 0, 15, 30, ...
_ELEVATION_STEP = 15.0


@dataclass(frozen=True)
class RotationTrajectory:
    """Constant-velocity rotation; angles wrap to [0, 360)."""

    start_angle: float = 0.0
    velocity: float = 0.0  # degrees / second
    sample_rate: float = 24000.0

    def __post_init__(self):
        if self.sample_rate <= 0.0:
            raise ConfigError("sample_rate must be positive")
        if self.velocity < 0.0:
            raise ConfigError("velocity must be non-negative "
                              "(direction is fixed by convention)")


def angle_at(traj: RotationTrajectory, k):
    """Rotation angle in degrees at sample index k (scalar or array)."""
    k = np.asarray(k, dtype=np.float64)
    return np.mod(traj.start_angle + traj.velocity * k / traj.sample_rate,
                  360.0)


@dataclass(frozen=True)
class LoudspeakerLayout:
    """Fixed room directions of the loudspeakers, degrees."""

    azimuths: tuple
    elevations: tuple

    def __post_init__(self):
        if len(self.azimuths) != len(self.elevations) or not self.azimuths:
            raise ConfigError("layout needs matching, non-empty angle lists")

    @property
    def count(self) -> int:
        return len(self.azimuths)

    @classmethod
    def default(cls, sources: int) -> "LoudspeakerLayout":
        """Frontal sources at elevations 0, 15, 30, ... degrees."""
        if sources < 1:
            raise ConfigError("at least one source required")
        return cls(azimuths=(0.0,) * sources,
                   elevations=tuple(_ELEVATION_STEP * s for s in range(sources)))


@dataclass
class SimulationOutput:
    """Noisy and clean microphone signals plus everything needed to score.

    ``references`` holds the exact per-sample impulse responses used by the
    convolution, shape (samples, sources, ref_taps).  The rotation convention
    is recorded in ``meta``: increasing rotation angle moves the sources from
    ipsilateral (90 degrees incidence at angle 0 in the default geometry)
    toward contralateral, and reference gains are free-field normalized at
    the sphere center (propagation delay retained, 1/r attenuation removed,
    unity at DC per incidence).
    """

    y: np.ndarray
    d: np.ndarray
    angle: np.ndarray
    incidences: np.ndarray
    references: np.ndarray
    noise_seed: int | None
    achieved_snr_db: float
    meta: dict = field(default_factory=dict)


def source_incidences(layout: LoudspeakerLayout, angles: np.ndarray,
                      sphere: SphereConfig) -> np.ndarray:
    """Incidence angle (degrees, quantized) per sample and source.

    The head rotation by ``angle`` appears as a source azimuth of
    ``azimuth - angle`` in the head frame; the incidence is the central
    angle between that direction and the ear direction.
    """
    ear_az = np.radians(sphere.ear_azimuth)
    ear_el = np.radians(sphere.ear_elevation)
    out = np.empty((angles.shape[0], layout.count))
    for s in range(layout.count):
        rel_az = np.radians(layout.azimuths[s] - angles)
        el = np.radians(layout.elevations[s])
        c = (np.sin(el) * np.sin(ear_el)
             + np.cos(el) * np.cos(ear_el) * np.cos(rel_az - ear_az))
        inc = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
        out[:, s] = np.round(inc / ANGLE_QUANTUM) * ANGLE_QUANTUM
    return out


def regressor_block(x: np.ndarray, taps: int) -> np.ndarray:
    """Sliding regressor view of one channel: row k is
    ``[x(k), x(k-1), ..., x(k-taps+1)]`` with zeros before the start."""
    padded = np.concatenate([np.zeros(taps - 1), x])
    return sliding_window_view(padded, taps)[:, ::-1]


def references_for(grid: HrirGrid, incidences: np.ndarray) -> np.ndarray:
    """Per-sample reference responses, shape (samples, sources, ref_taps)."""
    n, sources = incidences.shape
    refs = np.empty((n, sources, grid.config.ref_length))
    for s in range(sources):
        uniq, inverse = np.unique(incidences[:, s], return_inverse=True)
        bank = np.stack([grid.get(a).taps for a in uniq])
        refs[:, s, :] = bank[inverse]
    return refs


def simulate_miso(layout: LoudspeakerLayout, excitation: ExcitationSignal,
                  traj: RotationTrajectory, sphere: SphereConfig,
                  grid: HrirGrid | None = None) -> SimulationOutput:
    """Clean microphone signal of the time-variant MISO system.

    ``d(k) = sum_s sum_kappa x_s(k - kappa) h_{k,s}(kappa)`` with ``h_{k,s}``
    the reference response for the incidence implied by the rotation at
    sample k.  Excitation samples before the start are zero.
    """
    if excitation.channels != layout.count:
        raise ConfigError("excitation channel count must match the layout")
    n = excitation.samples
    angles = angle_at(traj, np.arange(n))
    incidences = source_incidences(layout, angles, sphere)
    if grid is None:
        grid = HrirGrid(sphere)
    refs = references_for(grid, incidences)
    d = np.zeros(n)
    for s in range(layout.count):
        block = regressor_block(excitation.data[s], sphere.ref_length)
        d += np.einsum("kl,kl->k", block, refs[:, s, :])
    return SimulationOutput(
        y=d.copy(), d=d, angle=angles, incidences=incidences, references=refs,
        noise_seed=None, achieved_snr_db=np.inf,
        meta={"rotation": "increasing angle moves sources toward the "
                          "contralateral side",
              "gain": "free-field normalized at sphere center, unity DC "
                      "per incidence, 1/r removed, delay retained"})


def add_noise(d: np.ndarray, snr_db: float | None, seed: int):
    """Add white Gaussian noise at the requested SNR.

    Returns ``(y, achieved_snr_db)``.  ``snr_db=None`` (or +inf) is the
    noiseless sentinel: the clean signal is returned bit-exactly.  A
    zero-power input is an error since the SNR would be undefined.
    """
    d = np.asarray(d, dtype=np.float64)
    power = float(np.mean(d ** 2))
    if power <= 0.0:
        raise ConfigError("clean signal has zero power; SNR undefined")
    if snr_db is None or np.isinf(snr_db):
        return d.copy(), np.inf
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(d.shape[0])
    noise *= np.sqrt(power * 10.0 ** (-snr_db / 10.0))
    achieved = 10.0 * np.log10(power / np.mean(noise ** 2))
    return d + noise, float(achieved)


def simulate_measurement(layout: LoudspeakerLayout,
                         excitation: ExcitationSignal,
                         traj: RotationTrajectory, sphere: SphereConfig,
                         snr_db: float | None, noise_seed: int,
                         grid: HrirGrid | None = None) -> SimulationOutput:
    """Full measurement: time-variant convolution plus measurement noise."""
    out = simulate_miso(layout, excitation, traj, sphere, grid=grid)
    out.y, out.achieved_snr_db = add_noise(out.d, snr_db, noise_seed)
    out.noise_seed = noise_seed
    return out
