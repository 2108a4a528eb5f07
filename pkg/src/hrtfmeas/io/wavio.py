"""Floating-point WAV interchange for signals.

Defaults to 32-bit float for interchange with external tools; 64-bit float
is available when a lossless round trip of simulated signals matters.
Internally signals are (channels, samples) float64.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..errors import ArchiveError


def write_wav(path, data: np.ndarray, sample_rate: float,
              bits: int = 32) -> None:
    """Write (channels, samples) float data as a float WAV file."""
    data = np.atleast_2d(np.asarray(data))
    if bits == 32:
        payload = data.T.astype(np.float32)
    elif bits == 64:
        payload = data.T.astype(np.float64)
    else:
        raise ArchiveError("only 32- and 64-bit float WAV supported")
    if payload.shape[1] == 1:
        payload = payload[:, 0]
    try:
        wavfile.write(str(path), int(round(sample_rate)), payload)
    except OSError as err:
        raise ArchiveError(f"cannot write {path}: {err}") from err


def read_wav(path) -> tuple[float, np.ndarray]:
    """Read a float WAV file; returns (sample_rate, (channels, samples))."""
    path = Path(path)
    if not path.exists():
        raise ArchiveError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as err:
        raise ArchiveError(f"cannot read {path}: {err}") from err
    if data.dtype not in (np.float32, np.float64):
        raise ArchiveError(
            f"{path}: expected float WAV data, got {data.dtype}")
    if data.ndim == 1:
        data = data[:, None]
    return float(rate), np.ascontiguousarray(data.T.astype(np.float64))
