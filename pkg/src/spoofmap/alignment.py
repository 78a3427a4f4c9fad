"""Time alignment of parallel real/fake pairs whose edges were trimmed.

Vocoded pairs are time-synchronized apart from trimmed edges, so alignment
is a single integer shift estimated from the DTW path between frame
log-energy contours, followed by cropping both signals to the common region.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentAmbiguousError, InvalidInputError
from .spectral import Waveform

DTW_FRAME = 400  # 25 ms at 16 kHz
DTW_HOP = 160  # 10 ms
_ENERGY_FLOOR = 1e-10
MIN_ALIGNED_SAMPLES = 512  # one default STFT frame


@dataclass(frozen=True)
class ParallelPair:
    """An aligned or raw (bona fide, spoof) waveform pair."""

    bona_fide: Waveform
    spoof: Waveform
    utterance_id: str = ""
    vocoder_id: str = ""
    aligned: bool = False

    def __post_init__(self) -> None:
        if self.bona_fide.sample_rate != self.spoof.sample_rate:
            raise InvalidInputError(
                f"sample-rate mismatch: bona fide {self.bona_fide.sample_rate} Hz "
                f"vs spoof {self.spoof.sample_rate} Hz"
            )
        if self.aligned and len(self.bona_fide) != len(self.spoof):
            raise InvalidInputError(
                f"aligned pair must have equal lengths, got "
                f"{len(self.bona_fide)} vs {len(self.spoof)}"
            )


@dataclass(frozen=True)
class AlignmentResult:
    """Estimated shift (positive = spoof starts later) and retained region.

    ``overlap_start`` indexes into the spoof signal; the matching bona fide
    start is ``overlap_start - shift``.
    """

    shift: int
    overlap_start: int
    overlap_len: int
    cost: float

    def __post_init__(self) -> None:
        if self.overlap_len <= 0:
            raise InvalidInputError(f"overlap_len must be positive, got {self.overlap_len}")


def frame_log_energy(x: Waveform, frame: int = DTW_FRAME, hop: int = DTW_HOP) -> np.ndarray:
    """Per-frame log(sum of squares + 1e-10) over non-centered frames."""
    if hop <= 0 or frame < hop:
        raise InvalidInputError(f"need frame >= hop > 0, got frame={frame} hop={hop}")
    n = len(x)
    if n < frame:
        raise InvalidInputError(f"signal of {n} samples is shorter than one frame ({frame})")
    n_frames = (n - frame) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x.samples, frame)[::hop][:n_frames]
    return np.log(np.sum(frames * frames, axis=1) + _ENERGY_FLOOR)


def _dtw_path(a: np.ndarray, b: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Symmetric-step DTW with |a_i - b_j| local cost.

    Ties break diag > right > down for determinism.  Returns the path as
    (i, j) nodes from (0, 0) to (len(a)-1, len(b)-1) plus the path cost.
    """
    n, m = len(a), len(b)
    cost = np.abs(a[:, None] - b[None, :])
    acc = np.empty((n, m))
    step = np.zeros((n, m), dtype=np.int8)  # 0=diag, 1=right (j-1), 2=down (i-1)
    acc[0, 0] = cost[0, 0]
    acc[0, 1:] = np.cumsum(cost[0, 1:]) + cost[0, 0]
    step[0, 1:] = 1
    acc[1:, 0] = np.cumsum(cost[1:, 0]) + cost[0, 0]
    step[1:, 0] = 2
    for i in range(1, n):
        for j in range(1, m):
            diag, right, down = acc[i - 1, j - 1], acc[i, j - 1], acc[i - 1, j]
            if diag <= right and diag <= down:
                acc[i, j] = cost[i, j] + diag
            elif right <= down:
                acc[i, j] = cost[i, j] + right
                step[i, j] = 1
            else:
                acc[i, j] = cost[i, j] + down
                step[i, j] = 2
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        s = step[i, j]
        if s == 0 and i > 0 and j > 0:
            i, j = i - 1, j - 1
        elif s == 1 and j > 0:
            j -= 1
        else:
            i -= 1
        path.append((i, j))
    path.reverse()
    return path, float(acc[n - 1, m - 1])


def dtw_align(pair: ParallelPair, frame: int = DTW_FRAME, hop: int = DTW_HOP) -> AlignmentResult:
    """Estimate the spoof-vs-bona-fide shift from log-energy DTW.

    The shift is the dominant frame offset (spoof index minus bona fide
    index) along the path; the mass-weighted mean over the dominant offset
    and its two neighbors recovers sub-frame shifts, which a plain center
    estimate quantizes by up to a whole hop.
    """
    e_spoof = frame_log_energy(pair.spoof, frame, hop)
    e_bona = frame_log_energy(pair.bona_fide, frame, hop)
    if len(e_spoof) < 2 or len(e_bona) < 2:
        raise InvalidInputError("need at least 2 frames on both sides for DTW")
    if np.ptp(e_spoof) == 0.0 and np.ptp(e_bona) == 0.0:
        raise AlignmentAmbiguousError(
            "both energy contours are constant; shift cannot be estimated"
        )
    path, cost = _dtw_path(e_spoof, e_bona)
    offsets = [i - j for i, j in path]
    counts = Counter(offsets)
    mode = max(counts, key=lambda o: (counts[o], -abs(o)))
    mass = sum(counts.get(o, 0) for o in (mode - 1, mode, mode + 1))
    center = sum(counts.get(o, 0) * o for o in (mode - 1, mode, mode + 1)) / mass
    shift = int(round(center * hop))

    len_s, len_b = len(pair.spoof), len(pair.bona_fide)
    if abs(shift) >= min(len_s, len_b):
        raise InvalidInputError(f"estimated shift {shift} exceeds signal length")
    start_s = max(0, shift)
    start_b = start_s - shift
    overlap_len = min(len_s - start_s, len_b - start_b)
    return AlignmentResult(shift=shift, overlap_start=start_s, overlap_len=overlap_len, cost=cost)


def apply_alignment(
    pair: ParallelPair, res: AlignmentResult, min_len: int = MIN_ALIGNED_SAMPLES
) -> ParallelPair:
    """Crop both waveforms to the common region and mark the pair aligned."""
    if res.overlap_len < min_len:
        raise InvalidInputError(
            f"overlap of {res.overlap_len} samples is shorter than one STFT frame ({min_len})"
        )
    start_s = res.overlap_start
    start_b = start_s - res.shift
    if start_b < 0 or start_b + res.overlap_len > len(pair.bona_fide):
        raise InvalidInputError("alignment result does not fit the bona fide signal")
    if start_s + res.overlap_len > len(pair.spoof):
        raise InvalidInputError("alignment result does not fit the spoof signal")
    sr = pair.bona_fide.sample_rate
    return dataclasses.replace(
        pair,
        bona_fide=Waveform(pair.bona_fide.samples[start_b : start_b + res.overlap_len], sr),
        spoof=Waveform(pair.spoof.samples[start_s : start_s + res.overlap_len], sr),
        aligned=True,
    )
