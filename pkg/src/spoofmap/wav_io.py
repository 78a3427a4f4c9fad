"""Mono WAV reading/writing (PCM 16-bit and IEEE float32)."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InvalidInputError
from .spectral import Waveform


def read_wav(path: str | Path) -> Waveform:
    """Load a mono WAV file. Stereo or unsupported sample formats are rejected."""
    rate, data = wavfile.read(os.fspath(path))
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidInputError(
            f"{path}: unsupported sample format {data.dtype}; use PCM 16-bit or float32"
        )
    return Waveform(samples, rate)


def write_wav(path: str | Path, wave: Waveform, fmt: str = "float32") -> None:
    """Write ``wave`` as float32 (lossless for this pipeline) or PCM 16-bit."""
    if fmt == "float32":
        data = wave.samples.astype(np.float32)
    elif fmt == "pcm16":
        clipped = np.clip(wave.samples, -1.0, 1.0)
        data = np.round(clipped * 32767.0).astype(np.int16)
    else:
        raise InvalidInputError(f"unknown WAV format {fmt!r}; use 'float32' or 'pcm16'")
    wavfile.write(os.fspath(path), wave.sample_rate, data)
