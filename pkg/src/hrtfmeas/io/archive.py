"""Binary archive for estimated impulse-response sets.

Layout (little endian):

    magic    8 bytes   b"HRIRSET\\0"
    version  u32       currently 1
    samples  u64       number of stored sample indices (after decimation)
    sources  u32
    taps     u32
    decim    u32       every decim-th sample of the original grid is stored
    rate     f64       sample rate in Hz
    meta_len u64       length of the UTF-8 JSON metadata block
    meta     bytes     provenance: config hash, seeds, method, version, ...
    angles   f64[samples]
    taps     f64[samples * sources * taps]   C order

Writes and reads round-trip bit-exactly; an unknown version is rejected.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ArchiveError

MAGIC = b"HRIRSET\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIQIIIdQ")


@dataclass
class HrirSetArchive:
    """Estimated responses on a (decimated) sample grid plus provenance."""

    estimates: np.ndarray   # (samples, sources, taps) float64
    angles: np.ndarray      # (samples,) float64
    sample_rate: float
    decimation: int = 1
    meta: dict | None = None

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.estimates.ndim != 3:
            raise ArchiveError("estimates must be (samples, sources, taps)")
        if self.angles.shape[0] != self.estimates.shape[0]:
            raise ArchiveError("angles must match the sample grid")
        if self.decimation < 1:
            raise ArchiveError("decimation must be at least 1")
        self.meta = dict(self.meta or {})


def decimate(estimates: np.ndarray, angles: np.ndarray,
             every: int) -> tuple[np.ndarray, np.ndarray]:
    """Keep every ``every``-th sample (the kept stride is recorded)."""
    if every < 1:
        raise ArchiveError("decimation must be at least 1")
    return estimates[::every], angles[::every]


def write_archive(path, archive: HrirSetArchive) -> None:
    meta_bytes = json.dumps(archive.meta, sort_keys=True).encode("utf-8")
    samples, sources, taps = archive.estimates.shape
    header = _HEADER.pack(MAGIC, VERSION, samples, sources, taps,
                          archive.decimation, archive.sample_rate,
                          len(meta_bytes))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(meta_bytes)
            fh.write(archive.angles.astype("<f8").tobytes())
            fh.write(archive.estimates.astype("<f8").tobytes())
    except OSError as err:
        raise ArchiveError(f"cannot write {path}: {err}") from err


def read_archive(path) -> HrirSetArchive:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as err:
        raise ArchiveError(f"cannot read {path}: {err}") from err
    if len(blob) < _HEADER.size:
        raise ArchiveError(f"{path}: truncated header")
    magic, version, samples, sources, taps, decim, rate, meta_len = \
        _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ArchiveError(f"{path}: not an HRIR-set archive")
    if version != VERSION:
        raise ArchiveError(
            f"{path}: unsupported archive version {version} "
            f"(this reader understands {VERSION})")
    off = _HEADER.size
    try:
        meta = json.loads(blob[off:off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ArchiveError(f"{path}: bad metadata block: {err}") from err
    off += meta_len
    n_angle = samples * 8
    n_est = samples * sources * taps * 8
    if len(blob) != off + n_angle + n_est:
        raise ArchiveError(f"{path}: payload size mismatch")
    angles = np.frombuffer(blob, dtype="<f8", count=samples, offset=off)
    estimates = np.frombuffer(blob, dtype="<f8", count=samples * sources * taps,
                              offset=off + n_angle)
    return HrirSetArchive(
        estimates=estimates.reshape(samples, sources, taps).copy(),
        angles=angles.copy(), sample_rate=rate, decimation=decim, meta=meta)
