"""Ground-truth time-frequency explanations for vocoded audio and metrics
for evaluating explanation heatmaps against them."""

from .alignment import AlignmentResult, ParallelPair, apply_alignment, dtw_align, frame_log_energy
from .annotation import (
    AnnotationConfig,
    BinaryMask,
    GaussianKernel2D,
    Heatmap,
    MaskOrigin,
    average_heatmaps,
    binarize,
    ground_truth_mask,
    smooth,
)
from .faithfulness import (
    FaithfulnessReport,
    ScoredPair,
    faithfulness_metrics,
    masked_audio,
    mix_spectrograms,
    run_faithfulness,
)
from .injector import ArtifactKind, ArtifactSpec, InjectionRecord, inject, synthesize_voice_like
from .metrics_seg import SegmentationReport, evaluate_dataset, f1, fbound, gdice, iou, ssim
from .scorer_io import (
    DummyBandEnergyScorer,
    ExternalScorerSession,
    ScorerRequest,
    ScorerResponse,
    external_scorer_session,
)
from .spectral import Spectrogram, StftConfig, Waveform, istft, stft, to_log_magnitude
from .wav_io import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "AnnotationConfig",
    "ArtifactKind",
    "ArtifactSpec",
    "BinaryMask",
    "DummyBandEnergyScorer",
    "ExternalScorerSession",
    "FaithfulnessReport",
    "GaussianKernel2D",
    "Heatmap",
    "InjectionRecord",
    "MaskOrigin",
    "ParallelPair",
    "ScoredPair",
    "ScorerRequest",
    "ScorerResponse",
    "SegmentationReport",
    "Spectrogram",
    "StftConfig",
    "Waveform",
    "apply_alignment",
    "average_heatmaps",
    "binarize",
    "dtw_align",
    "evaluate_dataset",
    "external_scorer_session",
    "f1",
    "faithfulness_metrics",
    "fbound",
    "frame_log_energy",
    "gdice",
    "ground_truth_mask",
    "inject",
    "iou",
    "istft",
    "masked_audio",
    "mix_spectrograms",
    "read_wav",
    "run_faithfulness",
    "smooth",
    "ssim",
    "stft",
    "synthesize_voice_like",
    "to_log_magnitude",
    "write_wav",
]
