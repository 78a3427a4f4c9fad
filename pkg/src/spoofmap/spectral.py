"""STFT analysis and overlap-add synthesis with an exact round-trip guarantee.

The inverse divides by the summed squared window envelope, so
``istft(stft(x))`` recovers ``x`` to float rounding wherever the envelope is
nonzero.  With the default centered analysis (reflect padding, trimmed on
synthesis) the round-trip is exact over the full original sample range.

All functions are pure; no arguments are mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ColaConfigError, InvalidInputError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_LOG_FLOOR = 1e-10

# Envelope values below this cannot be divided out meaningfully.
_NOLA_MIN = 1e-8
_ENVELOPE_GUARD = 1e-12


def _hann_periodic(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def _hamming_periodic(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)


_WINDOWS = {"hann": _hann_periodic, "hamming": _hamming_periodic}


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters.

    Defaults (512/128 Hann, centered, at 16 kHz) give 257 frequency bins and
    75% overlap, which keeps the overlap-add envelope strictly positive.
    """

    fft_size: int = 512
    hop: int = 128
    window: str = "hann"
    center_pad: bool = True

    def __post_init__(self) -> None:
        if self.fft_size < 2 or (self.fft_size & (self.fft_size - 1)) != 0:
            raise InvalidInputError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.hop <= 0 or self.hop > self.fft_size:
            raise InvalidInputError(f"hop must be in [1, fft_size], got {self.hop}")
        if self.fft_size % self.hop != 0:
            raise InvalidInputError(
                f"hop ({self.hop}) must divide fft_size ({self.fft_size}) evenly"
            )
        if self.window not in _WINDOWS:
            raise InvalidInputError(
                f"unknown window {self.window!r}; supported: {sorted(_WINDOWS)}"
            )

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@lru_cache(maxsize=32)
def _window_array(window: str, fft_size: int) -> np.ndarray:
    w = _WINDOWS[window](fft_size)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def _steady_state_envelope_min(window: str, fft_size: int, hop: int) -> float:
    # Minimum of sum_k w^2[j + k*hop] over one hop period: the fully
    # overlapped (interior) squared-window envelope.
    w2 = _window_array(window, fft_size) ** 2
    env = w2.reshape(fft_size // hop, hop).sum(axis=0)
    return float(env.min())


def check_invertible(cfg: StftConfig) -> None:
    """Raise ColaConfigError if overlap-add cannot invert this config."""
    if _steady_state_envelope_min(cfg.window, cfg.fft_size, cfg.hop) < _NOLA_MIN:
        raise ColaConfigError(
            f"window {cfg.window!r} with hop={cfg.hop}, fft_size={cfg.fft_size} "
            "has a vanishing overlap-add envelope; reconstruction is impossible"
        )


@dataclass
class Waveform:
    """Mono audio: float64 samples (nominally in [-1, 1]) at a fixed rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidInputError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.samples.size == 0:
            raise InvalidInputError("samples must be non-empty")
        if int(self.sample_rate) <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Spectrogram:
    """Magnitude/phase rasters of shape (frequency bins, time frames).

    ``num_samples`` records the analyzed signal length so synthesis can trim
    back to the exact original range; it is None for spectrograms not
    produced by ``stft`` (e.g. loaded from disk).
    """

    magnitude: np.ndarray
    phase: np.ndarray
    config: StftConfig
    sample_rate: int = DEFAULT_SAMPLE_RATE
    num_samples: int | None = None

    def __post_init__(self) -> None:
        self.magnitude = np.asarray(self.magnitude, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        if self.magnitude.shape != self.phase.shape:
            raise InvalidInputError(
                f"magnitude {self.magnitude.shape} and phase {self.phase.shape} differ"
            )
        if self.magnitude.ndim != 2 or self.magnitude.size == 0:
            raise InvalidInputError(f"expected non-empty F x T rasters, got {self.magnitude.shape}")
        if np.any(self.magnitude < 0):
            raise InvalidInputError("magnitude entries must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


def _frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Return (T, fft_size) analysis frames, reflect-padded when centered."""
    pad = cfg.fft_size // 2
    if cfg.center_pad:
        if x.size < pad + 1:
            raise InvalidInputError(
                f"centered analysis needs more than fft_size/2 = {pad} samples, got {x.size}"
            )
        x = np.pad(x, pad, mode="reflect")
    elif x.size < cfg.fft_size:
        raise InvalidInputError(
            f"signal of {x.size} samples is shorter than one frame ({cfg.fft_size})"
        )
    n_frames = (x.size - cfg.fft_size) // cfg.hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.fft_size)[:: cfg.hop]
    return frames[:n_frames]


def stft(x: Waveform, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Analyze ``x`` into magnitude and phase rasters of shape (F, T).

    F = fft_size/2 + 1.  Centered analysis yields T = len(x)//hop + 1 frames.
    Phase of a zero-magnitude bin is 0 by convention.
    """
    frames = _frame_signal(x.samples, cfg)
    w = _window_array(cfg.window, cfg.fft_size)
    z = np.fft.rfft(frames * w, axis=1).T  # (F, T)
    magnitude = np.abs(z)
    phase = np.angle(z)
    phase[magnitude == 0.0] = 0.0
    return Spectrogram(magnitude, phase, cfg, x.sample_rate, num_samples=x.samples.size)


def istft(spec: Spectrogram, length: int | None = None) -> Waveform:
    """Overlap-add synthesis, dividing by the squared-window envelope.

    ``length`` overrides the output sample count; by default it is
    ``spec.num_samples`` when known, else the hop-aligned span (T-1)*hop for
    centered configs / (T-1)*hop + fft_size for uncentered ones.
    """
    cfg = spec.config
    check_invertible(cfg)
    n_frames = spec.magnitude.shape[1]
    if spec.magnitude.shape[0] != cfg.num_bins:
        raise InvalidInputError(
            f"raster has {spec.magnitude.shape[0]} bins but config implies {cfg.num_bins}"
        )

    z = spec.magnitude * np.exp(1j * spec.phase)
    w = _window_array(cfg.window, cfg.fft_size)
    frames = np.fft.irfft(z.T, n=cfg.fft_size, axis=1) * w

    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    out = np.zeros(total)
    env = np.zeros(total)
    w2 = w * w
    for m in range(n_frames):
        start = m * cfg.hop
        out[start : start + cfg.fft_size] += frames[m]
        env[start : start + cfg.fft_size] += w2
    out /= np.maximum(env, _ENVELOPE_GUARD)

    pad = cfg.fft_size // 2 if cfg.center_pad else 0
    if length is None:
        # num_samples is a hint; clamp it to the span the frames cover
        # (uncentered analysis drops the tail beyond the last frame)
        length = spec.num_samples if spec.num_samples is not None else total - 2 * pad
        length = min(length, total - pad)
    if length <= 0 or pad + length > total:
        raise InvalidInputError(
            f"cannot reconstruct {length} samples from {n_frames} frames (max {total - pad})"
        )
    return Waveform(out[pad : pad + length], spec.sample_rate)


def to_log_magnitude(spec: Spectrogram, floor: float = DEFAULT_LOG_FLOOR) -> np.ndarray:
    """Elementwise log(max(magnitude, floor)); invertible by exp above the floor."""
    if floor <= 0:
        raise InvalidInputError(f"floor must be positive, got {floor}")
    return np.log(np.maximum(spec.magnitude, floor))
