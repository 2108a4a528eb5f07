"""Ingestion of recorded signals for identification.

Aligns a microphone WAV with either a recorded excitation WAV or a
regenerated excitation (kind + seed).  No resampling is performed:
mismatched sample rates are an error, as are mismatched lengths or channel
maps that point outside the files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..excitation import ExcitationSignal, gen_white_noise, multichannel_pseq
from ..io.wavio import read_wav


@dataclass
class IngestResult:
    excitation: ExcitationSignal
    y: np.ndarray
    sample_rate: float
    meta: dict = field(default_factory=dict)


def regen_excitation(kind: str, taps: int, channels: int, samples: int,
                     seed: int) -> ExcitationSignal:
    if kind == "pseq":
        return multichannel_pseq(taps, channels, samples, seed)
    if kind == "white_noise":
        return gen_white_noise(channels, samples, seed)
    raise ConfigError(f"unknown excitation kind {kind!r}")


def ingest_recording(mic_file, mic_channel: int = 0,
                     excitation_file=None, source_channels=None,
                     regen: dict | None = None,
                     expect_sample_rate: float | None = None) -> IngestResult:
    """Validate and align recorded signals.

    Exactly one of ``excitation_file`` (with ``source_channels`` mapping
    loudspeakers to channels of that file) or ``regen`` (a dict with kind,
    taps, channels, seed) must be given.
    """
    rate, mic = read_wav(mic_file)
    if expect_sample_rate is not None and rate != expect_sample_rate:
        raise ConfigError(
            f"sample rate mismatch: {mic_file} has {rate:g} Hz, "
            f"expected {expect_sample_rate:g} Hz")
    if not 0 <= mic_channel < mic.shape[0]:
        raise ConfigError(
            f"microphone channel {mic_channel} not present in {mic_file} "
            f"({mic.shape[0]} channels)")
    y = mic[mic_channel]
    total = y.shape[0]

    if (excitation_file is None) == (regen is None):
        raise ConfigError(
            "exactly one of excitation_file or regen must be given")
    if excitation_file is not None:
        exc_rate, exc_data = read_wav(excitation_file)
        if exc_rate != rate:
            raise ConfigError(
                f"sample rate mismatch: {excitation_file} has {exc_rate:g} "
                f"Hz, microphone has {rate:g} Hz")
        if exc_data.shape[1] != total:
            raise ConfigError(
                f"length mismatch: excitation has {exc_data.shape[1]} "
                f"samples, microphone has {total}")
        if source_channels is None:
            source_channels = list(range(exc_data.shape[0]))
        for ch in source_channels:
            if not 0 <= ch < exc_data.shape[0]:
                raise ConfigError(
                    f"excitation channel {ch} not present in "
                    f"{excitation_file} ({exc_data.shape[0]} channels)")
        data = exc_data[list(source_channels)]
        excitation = ExcitationSignal(data, "recorded", seed=-1)
    else:
        spec = dict(regen)
        for key in ("kind", "taps", "channels", "seed"):
            if key not in spec:
                raise ConfigError(f"regen spec missing {key!r}")
        excitation = regen_excitation(spec["kind"], int(spec["taps"]),
                                      int(spec["channels"]), total,
                                      int(spec["seed"]))
    return IngestResult(excitation=excitation, y=y, sample_rate=rate,
                        meta={"mic_file": str(mic_file),
                              "mic_channel": mic_channel})
