"""Synthetic parallel pairs with known artifact regions.

Artifacts are applied in the STFT magnitude domain and resynthesized, so the
modified region is well-defined on the analysis grid.  The unmodified side
of the pair is passed through the same analysis/synthesis round trip, which
makes the artifact the only difference between the two waveforms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .alignment import ParallelPair
from .annotation import BinaryMask, MaskOrigin
from .errors import InvalidInputError
from .spectral import Spectrogram, StftConfig, Waveform, istft, stft


class ArtifactKind(enum.Enum):
    HARMONIC_REMOVAL = "harmonic_removal"
    BAND_ATTENUATION = "band_attenuation"
    NOISE_PATCH = "noise_patch"


@dataclass(frozen=True)
class ArtifactSpec:
    """A rectangular time-frequency region and how to corrupt it."""

    kind: ArtifactKind
    t_start: int
    t_end: int
    f_low: int
    f_high: int
    strength_db: float = 20.0

    def __post_init__(self) -> None:
        if not 0 <= self.t_start < self.t_end:
            raise InvalidInputError(f"need 0 <= t_start < t_end, got [{self.t_start}, {self.t_end})")
        if not 0 <= self.f_low < self.f_high:
            raise InvalidInputError(f"need 0 <= f_low < f_high, got [{self.f_low}, {self.f_high})")
        if self.strength_db <= 0:
            raise InvalidInputError(f"strength_db must be positive, got {self.strength_db}")

    @property
    def region(self) -> tuple[slice, slice]:
        return slice(self.f_low, self.f_high), slice(self.t_start, self.t_end)

    @property
    def area(self) -> int:
        return (self.t_end - self.t_start) * (self.f_high - self.f_low)


@dataclass
class InjectionRecord:
    pair: ParallelPair
    oracle_mask: BinaryMask
    specs: list[ArtifactSpec]


def synthesize_voice_like(
    duration_s: float, sample_rate: int = 16000, seed: int = 0
) -> Waveform:
    """Seeded harmonic-rich test signal standing in for bona fide speech.

    A 100-250 Hz fundamental random walk carries 10 harmonics of decaying
    amplitude under a slow energy envelope, over a -40 dB noise floor.  The
    envelope keeps frame energy non-constant so pairs remain alignable.
    """
    if duration_s <= 0:
        raise InvalidInputError(f"duration must be positive, got {duration_s}")
    n = round(duration_s * sample_rate)
    rng = np.random.default_rng(seed)

    ctrl_hop = 160
    n_ctrl = n // ctrl_hop + 2
    f0 = np.empty(n_ctrl)
    f0[0] = rng.uniform(120.0, 220.0)
    steps = rng.normal(0.0, 2.5, size=n_ctrl - 1)
    for i in range(1, n_ctrl):
        f0[i] = min(250.0, max(100.0, f0[i - 1] + steps[i - 1]))
    env = np.empty(n_ctrl)
    env[0] = rng.uniform(0.5, 1.0)
    env_steps = rng.normal(0.0, 0.2, size=n_ctrl - 1)
    for i in range(1, n_ctrl):
        env[i] = min(1.0, max(0.15, env[i - 1] + env_steps[i - 1]))

    t = np.arange(n)
    ctrl_t = np.arange(n_ctrl) * ctrl_hop
    f0_per_sample = np.interp(t, ctrl_t, f0)
    env_per_sample = np.interp(t, ctrl_t, env)

    phase = 2.0 * np.pi * np.cumsum(f0_per_sample) / sample_rate
    harmonic_sum = np.zeros(n)
    for h in range(1, 11):
        harmonic_sum += (0.75 ** (h - 1)) * np.sin(h * phase)
    signal = env_per_sample * harmonic_sum
    signal *= 0.5 / np.max(np.abs(signal))

    rms = math.sqrt(float(np.mean(signal * signal)))
    noise = rng.standard_normal(n) * (rms * 10.0 ** (-40.0 / 20.0))
    return Waveform(signal + noise, sample_rate)


def _remove_ridges(magnitude: np.ndarray, spec: ArtifactSpec, top_k: int) -> None:
    """Zero the top-k per-frame local-maximum bins inside the region."""
    f_lo, f_hi = spec.f_low, spec.f_high
    for t in range(spec.t_start, spec.t_end):
        col = magnitude[f_lo:f_hi, t]
        if col.size < 3:
            magnitude[f_lo:f_hi, t] = 0.0
            continue
        is_peak = np.zeros(col.size, dtype=bool)
        is_peak[1:-1] = (col[1:-1] >= col[:-2]) & (col[1:-1] >= col[2:]) & (col[1:-1] > 0)
        peaks = np.flatnonzero(is_peak)
        if peaks.size == 0:
            continue
        order = np.argsort(col[peaks])[::-1]
        for p in peaks[order[:top_k]]:
            magnitude[f_lo + p, t] = 0.0


def inject(
    x: Waveform,
    specs: list[ArtifactSpec],
    stft_cfg: StftConfig = StftConfig(),
    seed: int = 0,
    ridge_top_k: int = 3,
) -> InjectionRecord:
    """Apply the artifacts to ``x`` in the magnitude domain and resynthesize.

    Returns the (round-tripped original, modified) pair, aligned by
    construction, plus the oracle mask marking exactly the union of the
    spec regions on the analysis grid.
    """
    analyzed = stft(x, stft_cfg)
    n_freq, n_frames = analyzed.shape
    mask = np.zeros((n_freq, n_frames), dtype=bool)
    magnitude = analyzed.magnitude.copy()
    rng = np.random.default_rng(seed)

    for spec in specs:
        if spec.f_high > n_freq or spec.t_end > n_frames:
            raise InvalidInputError(
                f"artifact region f[{spec.f_low}:{spec.f_high}] t[{spec.t_start}:{spec.t_end}] "
                f"exceeds spectrogram {n_freq} x {n_frames}"
            )
        region = spec.region
        if spec.kind is ArtifactKind.BAND_ATTENUATION:
            magnitude[region] *= 10.0 ** (-spec.strength_db / 20.0)
        elif spec.kind is ArtifactKind.HARMONIC_REMOVAL:
            _remove_ridges(magnitude, spec, ridge_top_k)
        elif spec.kind is ArtifactKind.NOISE_PATCH:
            floor = float(np.median(magnitude[region]))
            level = floor * 10.0 ** (spec.strength_db / 20.0)
            shape = magnitude[region].shape
            magnitude[region] += level * np.abs(rng.standard_normal(shape))
        mask[region] = True

    modified = Spectrogram(
        magnitude, analyzed.phase, stft_cfg, x.sample_rate, num_samples=analyzed.num_samples
    )
    pair = ParallelPair(
        bona_fide=istft(analyzed),
        spoof=istft(modified),
        utterance_id="",
        vocoder_id="injected",
        aligned=True,
    )
    return InjectionRecord(pair, BinaryMask(mask, MaskOrigin.INJECTED_ORACLE), list(specs))
