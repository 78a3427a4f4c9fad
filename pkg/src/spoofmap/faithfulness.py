"""Classifier-faithfulness metrics under bona-fide-replacement masking.

Masked regions keep spoof content; everything else is replaced with the
real counterpart in both magnitude and phase, resynthesized, and rescored.
A faithful heatmap keeps the spoof score high (small drop); an unfaithful
one hands the artifact region back to the real signal and the score falls.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import ParallelPair
from .annotation import Heatmap, binarize
from .errors import InvalidInputError
from .formats import atomic_write_bytes
from .scorer_io import Scorer
from .spectral import Spectrogram, StftConfig, Waveform, istft, stft

AD_BASE_EPSILON = 1e-8
DECISION_THRESHOLD = 0.5

FAITHFULNESS_COLUMNS = ("ai", "ad", "ag", "fid_in")


@dataclass(frozen=True)
class ScoredPair:
    """Spoof probability before and after bona-fide-replacement masking."""

    base_score: float
    masked_score: float

    def __post_init__(self) -> None:
        for name, v in (("base_score", self.base_score), ("masked_score", self.masked_score)):
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {v}")


@dataclass
class FaithfulnessReport:
    ai: float  # percentage of items whose score increased
    ad: float  # average drop, percent
    ag: float  # average gain, percent
    fid_in: float  # decision agreement fraction in [0, 1]
    per_utterance: list[dict] = field(default_factory=list)
    n_items: int = 0
    errors: list[dict] = field(default_factory=list)


def _wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Wrap radians to (-pi, pi]."""
    return np.mod(theta - np.pi, -2.0 * np.pi) + np.pi


def mix_spectrograms(spoof: Spectrogram, bona: Spectrogram, h: Heatmap) -> Spectrogram:
    """Convex mix: magnitude h*Ms + (1-h)*Mb; phase along the shorter arc.

    For binary h this reduces exactly to picking the spoof or bona fide
    phase, so fractional heatmaps are a safe generalization.
    """
    if spoof.shape != bona.shape or spoof.shape != h.shape:
        raise InvalidInputError(
            f"shape mismatch: spoof {spoof.shape}, bona {bona.shape}, heatmap {h.shape}"
        )
    if spoof.config != bona.config:
        raise InvalidInputError("spoof and bona fide spectrograms use different STFT configs")
    w = h.data
    magnitude = w * spoof.magnitude + (1.0 - w) * bona.magnitude
    blended = _wrap_phase(bona.phase + w * _wrap_phase(spoof.phase - bona.phase))
    phase = np.where(w == 1.0, spoof.phase, np.where(w == 0.0, bona.phase, blended))
    num_samples = spoof.num_samples if spoof.num_samples is not None else bona.num_samples
    return Spectrogram(magnitude, phase, spoof.config, spoof.sample_rate, num_samples)


def masked_audio(pair: ParallelPair, h: Heatmap, stft_cfg: StftConfig = StftConfig()) -> Waveform:
    """Resynthesize the pair's spoof with non-highlighted regions made real."""
    if not pair.aligned:
        raise InvalidInputError("pair must be aligned before masking")
    return istft(mix_spectrograms(stft(pair.spoof, stft_cfg), stft(pair.bona_fide, stft_cfg), h))


def faithfulness_metrics(
    scores: list[ScoredPair], ids: list[str] | None = None
) -> FaithfulnessReport:
    """Aggregate AI/AD/AG/Fid-In over scored pairs.

    AD_i = max(0, base - masked)/base * 100 (base epsilon-guarded);
    AI = 100 * fraction{masked > base};
    AG_i = max(0, masked - base)/(1 - base) * 100 (guarded at base = 1);
    Fid-In = fraction of agreeing >= 0.5 spoof decisions.
    """
    if not scores:
        raise InvalidInputError("need at least one scored pair")
    if ids is None:
        ids = [f"item{i:04d}" for i in range(len(scores))]
    rows = []
    for uid, sp in zip(ids, scores):
        base, masked = sp.base_score, sp.masked_score
        guarded = base < AD_BASE_EPSILON or base > 1.0 - AD_BASE_EPSILON
        ad_i = max(0.0, base - masked) / max(base, AD_BASE_EPSILON) * 100.0
        ag_i = max(0.0, masked - base) / max(1.0 - base, AD_BASE_EPSILON) * 100.0
        rows.append(
            {
                "utterance_id": uid,
                "base_score": base,
                "masked_score": masked,
                "ad": ad_i,
                "ag": ag_i,
                "increased": masked > base,
                "decision_match": (masked >= DECISION_THRESHOLD) == (base >= DECISION_THRESHOLD),
                "epsilon_guarded": guarded,
            }
        )
    n = len(rows)
    return FaithfulnessReport(
        ai=100.0 * sum(r["increased"] for r in rows) / n,
        ad=float(np.mean([r["ad"] for r in rows])),
        ag=float(np.mean([r["ag"] for r in rows])),
        fid_in=sum(r["decision_match"] for r in rows) / n,
        per_utterance=rows,
        n_items=n,
    )


def run_faithfulness(
    pairs: list[ParallelPair],
    heatmaps: list[Heatmap],
    scorer: Scorer,
    stft_cfg: StftConfig = StftConfig(),
    binarize_quantile: float | None = None,
    ids: list[str] | None = None,
) -> FaithfulnessReport:
    """Score every pair before and after masking and aggregate.

    The base score is taken on the analysis/synthesis round trip of the
    spoof (the same lens the masking path uses), so an all-ones heatmap
    reproduces the base input bit-for-bit and the no-change identity holds
    exactly.  Heatmaps are optionally binarized before mixing.  Scorer
    failures are recorded per item and excluded from aggregation.
    """
    if len(pairs) != len(heatmaps):
        raise InvalidInputError(f"{len(pairs)} pairs vs {len(heatmaps)} heatmaps")
    if ids is None:
        ids = [p.utterance_id or f"item{i:04d}" for i, p in enumerate(pairs)]
    scores, kept_ids, errors = [], [], []
    for uid, pair, h in zip(ids, pairs, heatmaps):
        if binarize_quantile is not None:
            h = Heatmap(binarize(h, binarize_quantile).data.astype(np.float64))
        try:
            base = scorer.score(istft(stft(pair.spoof, stft_cfg)))
            masked = scorer.score(masked_audio(pair, h, stft_cfg))
            scores.append(ScoredPair(base_score=base, masked_score=masked))
            kept_ids.append(uid)
        except Exception as exc:  # per-item isolation; aggregation continues
            errors.append({"utterance_id": uid, "error": str(exc)})
    if not scores:
        raise InvalidInputError(f"all {len(pairs)} items failed scoring")
    report = faithfulness_metrics(scores, kept_ids)
    report.errors = errors
    return report


def merge_reports(reports: list[FaithfulnessReport]) -> FaithfulnessReport:
    """Recombine chunked reports: recompute aggregates over all rows in
    utterance_id order (a deterministic fold, independent of chunking)."""
    rows = sorted(
        (r for rep in reports for r in rep.per_utterance), key=lambda r: r["utterance_id"]
    )
    errors = sorted(
        (e for rep in reports for e in rep.errors), key=lambda e: e["utterance_id"]
    )
    if not rows:
        raise InvalidInputError("no successfully scored items to merge")
    merged = faithfulness_metrics(
        [ScoredPair(r["base_score"], r["masked_score"]) for r in rows],
        [r["utterance_id"] for r in rows],
    )
    merged.errors = errors
    return merged


def write_faithfulness_csv(report: FaithfulnessReport, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("utterance_id", "base_score", "masked_score", "ad", "ag"))
    for row in sorted(report.per_utterance, key=lambda r: r["utterance_id"]):
        writer.writerow(
            [
                row["utterance_id"],
                f"{row['base_score']:.6f}",
                f"{row['masked_score']:.6f}",
                f"{row['ad']:.2f}",
                f"{row['ag']:.2f}",
            ]
        )
    writer.writerow(
        [
            "aggregate",
            "",
            "",
            f"{report.ad:.2f}",
            f"{report.ag:.2f}",
        ]
    )
    writer.writerow(["ai", f"{report.ai:.2f}", "", "", ""])
    writer.writerow(["fid_in", f"{report.fid_in:.4f}", "", "", ""])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def write_faithfulness_json(report: FaithfulnessReport, path: str | Path) -> None:
    payload = {
        "n_items": report.n_items,
        "ai": report.ai,
        "ad": report.ad,
        "ag": report.ag,
        "fid_in": report.fid_in,
        "per_utterance": report.per_utterance,
        "errors": report.errors,
    }
    atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode("utf-8"))
