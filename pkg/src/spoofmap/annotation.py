"""Ground-truth explanation masks from aligned parallel pairs.

The pipeline: smooth both magnitude spectrograms with a small 2-D Gaussian,
take the bona-fide-normalized absolute difference, and keep the bins above
the per-utterance 95% quantile.  The smoothing favors dense regions; the
normalization compensates for the energy concentration in low frequency
bins.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .alignment import ParallelPair
from .errors import InvalidInputError
from .spectral import DEFAULT_LOG_FLOOR, StftConfig, stft


@dataclass(frozen=True)
class GaussianKernel2D:
    """Separable truncated Gaussian; sizes are odd window lengths per axis.

    The variance parameters are sigma^2.  Weights are renormalized to unit
    sum after truncation, so smoothing preserves constants.
    """

    size_time: int = 3
    size_freq: int = 11
    var_time: float = 3.0
    var_freq: float = 5.0

    def __post_init__(self) -> None:
        for name, size in (("size_time", self.size_time), ("size_freq", self.size_freq)):
            if size < 1 or size % 2 == 0:
                raise InvalidInputError(f"{name} must be odd and >= 1, got {size}")
        if self.var_time <= 0 or self.var_freq <= 0:
            raise InvalidInputError("kernel variances must be positive")

    def weights_time(self) -> np.ndarray:
        return _gauss1d(self.size_time, self.var_time)

    def weights_freq(self) -> np.ndarray:
        return _gauss1d(self.size_freq, self.var_freq)


def _gauss1d(size: int, var: float) -> np.ndarray:
    offsets = np.arange(size) - size // 2
    w = np.exp(-(offsets.astype(np.float64) ** 2) / (2.0 * var))
    return w / w.sum()


class MaskOrigin(enum.Enum):
    GROUND_TRUTH = "ground_truth"
    BINARIZED_PREDICTION = "binarized_prediction"
    INJECTED_ORACLE = "injected_oracle"


@dataclass
class BinaryMask:
    data: np.ndarray
    origin: MaskOrigin

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=bool)
        if self.data.ndim != 2 or self.data.size == 0:
            raise InvalidInputError(f"mask must be a non-empty 2-D raster, got {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class Heatmap:
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.size == 0:
            raise InvalidInputError(f"heatmap must be a non-empty 2-D raster, got {self.data.shape}")
        if np.any(self.data < 0.0) or np.any(self.data > 1.0):
            raise InvalidInputError("heatmap entries must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class AnnotationConfig:
    kernel: GaussianKernel2D = field(default_factory=GaussianKernel2D)
    quantile: float = 0.95
    denom_epsilon: float = 1e-8
    magnitude_domain: str = "linear"  # or "log"

    def __post_init__(self) -> None:
        if not 0.0 < self.quantile < 1.0:
            raise InvalidInputError(f"quantile must be in (0, 1), got {self.quantile}")
        if self.denom_epsilon <= 0:
            raise InvalidInputError("denom_epsilon must be positive")
        if self.magnitude_domain not in ("linear", "log"):
            raise InvalidInputError(
                f"magnitude_domain must be 'linear' or 'log', got {self.magnitude_domain!r}"
            )


def _conv1d_reflect(raster: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    half = len(weights) // 2
    if half == 0:
        return raster * weights[0]
    pad = [(0, 0), (0, 0)]
    pad[axis] = (half, half)
    padded = np.pad(raster, pad, mode="reflect")
    out = np.zeros_like(raster)
    for k, w in enumerate(weights):
        if axis == 0:
            out += w * padded[k : k + raster.shape[0], :]
        else:
            out += w * padded[:, k : k + raster.shape[1]]
    return out


def smooth(raster: np.ndarray, kernel: GaussianKernel2D = GaussianKernel2D()) -> np.ndarray:
    """Separable Gaussian smoothing with reflect borders; shape-preserving."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2 or raster.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D raster, got shape {raster.shape}")
    if kernel.size_freq > raster.shape[0] or kernel.size_time > raster.shape[1]:
        raise InvalidInputError(
            f"kernel ({kernel.size_freq} x {kernel.size_time}) larger than raster {raster.shape}"
        )
    out = _conv1d_reflect(raster, kernel.weights_freq(), axis=0)
    return _conv1d_reflect(out, kernel.weights_time(), axis=1)


def quantile_threshold(values: np.ndarray, quantile: float) -> float:
    """Linear-interpolation quantile over all entries (the (n-1)*q convention)."""
    if not 0.0 < quantile < 1.0:
        raise InvalidInputError(f"quantile must be in (0, 1), got {quantile}")
    return float(np.quantile(np.asarray(values, dtype=np.float64).ravel(), quantile))


def normalized_difference(
    mag_spoof: np.ndarray, mag_bona: np.ndarray, cfg: AnnotationConfig = AnnotationConfig()
) -> np.ndarray:
    """|G(Ms) - G(Mb)| / (|G(Mb)| + eps) on same-shape magnitude rasters."""
    if mag_spoof.shape != mag_bona.shape:
        raise InvalidInputError(
            f"spectrogram shapes differ: {mag_spoof.shape} vs {mag_bona.shape}"
        )
    g_spoof = smooth(mag_spoof, cfg.kernel)
    g_bona = smooth(mag_bona, cfg.kernel)
    return np.abs(g_spoof - g_bona) / (np.abs(g_bona) + cfg.denom_epsilon)


def ground_truth_mask(
    pair: ParallelPair,
    cfg: AnnotationConfig = AnnotationConfig(),
    stft_cfg: StftConfig = StftConfig(),
) -> tuple[BinaryMask, Heatmap]:
    """Annotate an aligned pair: binary mask above the per-utterance quantile
    of the normalized smoothed difference, plus the min-max scaled heatmap.
    """
    if not pair.aligned:
        raise InvalidInputError("pair must be aligned before annotation")
    mag_s = stft(pair.spoof, stft_cfg).magnitude
    mag_b = stft(pair.bona_fide, stft_cfg).magnitude
    if cfg.magnitude_domain == "log":
        mag_s = np.log(np.maximum(mag_s, DEFAULT_LOG_FLOOR))
        mag_b = np.log(np.maximum(mag_b, DEFAULT_LOG_FLOOR))
    diff = normalized_difference(mag_s, mag_b, cfg)
    tau = quantile_threshold(diff, cfg.quantile)
    mask = BinaryMask(diff > tau, MaskOrigin.GROUND_TRUTH)

    lo, hi = diff.min(), diff.max()
    scaled = (diff - lo) / (hi - lo) if hi > lo else np.zeros_like(diff)
    return mask, Heatmap(scaled)


def average_heatmaps(maps: list[Heatmap]) -> Heatmap:
    """Elementwise mean of same-shape heatmaps (e.g. 32 sampled predictions).

    Summation is a pairwise tree, so averaging 2^k copies of one map
    returns it bit-identically.
    """
    if not maps:
        raise InvalidInputError("need at least one heatmap")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise InvalidInputError(f"heatmap shapes differ: {shape} vs {m.shape}")
    layers = [m.data for m in maps]
    while len(layers) > 1:
        reduced = [layers[i] + layers[i + 1] for i in range(0, len(layers) - 1, 2)]
        if len(layers) % 2:
            reduced.append(layers[-1])
        layers = reduced
    return Heatmap(np.clip(layers[0] / len(maps), 0.0, 1.0))


def binarize(h: Heatmap, quantile: float = 0.95) -> BinaryMask:
    """Threshold a heatmap at its own quantile (same rule as ground_truth_mask).

    A constant heatmap has no values above its own quantile; the result is
    all false and a degenerate-input warning is emitted.
    """
    values = h.data
    if values.max() == values.min():
        warnings.warn("constant heatmap: binarization is degenerate (all false)", RuntimeWarning)
        return BinaryMask(np.zeros(values.shape, dtype=bool), MaskOrigin.BINARIZED_PREDICTION)
    tau = quantile_threshold(values, quantile)
    return BinaryMask(values > tau, MaskOrigin.BINARIZED_PREDICTION)
