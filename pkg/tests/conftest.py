from __future__ import annotations

import numpy as np
import pytest

from spoofmap.injector import ArtifactKind, ArtifactSpec, inject, synthesize_voice_like
from spoofmap.spectral import StftConfig, Waveform, stft


def make_noise(n: int, seed: int, sample_rate: int = 16000) -> Waveform:
    rng = np.random.default_rng(seed)
    return Waveform(rng.uniform(-0.5, 0.5, size=n), sample_rate)


def make_band_attenuated_record(
    seed: int,
    duration_s: float = 1.0,
    f_low: int = 60,
    f_high: int = 124,
    t_frac: tuple[float, float] = (0.25, 0.45),
    strength_db: float = 20.0,
    cfg: StftConfig = StftConfig(),
):
    """One injected pair with a single rectangular band-attenuation artifact."""
    wave = synthesize_voice_like(duration_s, seed=seed)
    n_frames = stft(wave, cfg).shape[1]
    t_start = int(round(t_frac[0] * n_frames))
    t_end = int(round(t_frac[1] * n_frames))
    spec = ArtifactSpec(
        kind=ArtifactKind.BAND_ATTENUATION,
        t_start=t_start,
        t_end=t_end,
        f_low=f_low,
        f_high=f_high,
        strength_db=strength_db,
    )
    return inject(wave, [spec], cfg, seed=seed + 1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240901)
