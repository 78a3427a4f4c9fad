"""Segmentation-alignment metrics between predictions and ground truth.

All metrics return values in [0, 1]; reports scale by 100 for presentation.
Empty-vs-empty cases score 1 so a perfect no-artifact prediction is not
penalized.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import BinaryMask, Heatmap, binarize
from .errors import InvalidInputError
from .formats import atomic_write_bytes

GDICE_EPSILON = 1e-8
FBOUND_DEFAULT_TOL = 2
SSIM_WINDOW = 7
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

METRIC_COLUMNS = ("gdice", "f1", "iou", "fbound", "ssim")


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    _check_shapes(pred.data, gt.data)
    union = np.logical_or(pred.data, gt.data).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred.data, gt.data).sum() / union)


def f1(pred: BinaryMask, gt: BinaryMask) -> float:
    """Dice / F1 over foreground bins; 1.0 when both masks are empty."""
    _check_shapes(pred.data, gt.data)
    tp = np.logical_and(pred.data, gt.data).sum()
    denom = pred.data.sum() + gt.data.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * tp / denom)


def gdice(pred: BinaryMask, gt: BinaryMask) -> float:
    """Two-class generalized Dice with inverse squared class-volume weights."""
    _check_shapes(pred.data, gt.data)
    num = 0.0
    den = 0.0
    for p_l, g_l in ((pred.data, gt.data), (~pred.data, ~gt.data)):
        w = 1.0 / (float(g_l.sum()) ** 2 + GDICE_EPSILON)
        num += w * 2.0 * float(np.logical_and(p_l, g_l).sum())
        den += w * (float(p_l.sum()) + float(g_l.sum()))
    if den == 0.0:
        return 1.0
    return num / den


def boundary(mask: np.ndarray) -> np.ndarray:
    """Mask minus its 4-neighborhood erosion; outside the image is background."""
    padded = np.pad(mask, 1, constant_values=False)
    core = (
        padded[1:-1, 1:-1]
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return mask & ~core


def _chebyshev_dilate(mask: np.ndarray, tol: int) -> np.ndarray:
    if tol == 0:
        return mask
    padded = np.pad(mask, tol, constant_values=False)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (2 * tol + 1, 2 * tol + 1))
    return windows.any(axis=(2, 3))


def fbound(pred: BinaryMask, gt: BinaryMask, tol: int = FBOUND_DEFAULT_TOL) -> float:
    """Boundary F1: matched boundary pixels within Chebyshev distance ``tol``."""
    _check_shapes(pred.data, gt.data)
    if tol < 0:
        raise InvalidInputError(f"tolerance must be >= 0, got {tol}")
    pb = boundary(pred.data)
    gb = boundary(gt.data)
    n_pb, n_gb = int(pb.sum()), int(gb.sum())
    if n_pb == 0 and n_gb == 0:
        return 1.0
    if n_pb == 0 or n_gb == 0:
        return 0.0
    precision = float((pb & _chebyshev_dilate(gb, tol)).sum()) / n_pb
    recall = float((gb & _chebyshev_dilate(pb, tol)).sum()) / n_gb
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _box_mean(a: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    padded = np.pad(a, half, mode="reflect")
    views = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    return views.mean(axis=(2, 3))


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean local SSIM with a uniform window, unit dynamic range, reflect pad.

    Inputs are rasters scaled to [0, 1]; local statistics are population
    moments over each window.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    half = window // 2
    if min(a.shape) <= half:
        raise InvalidInputError(
            f"raster {a.shape} too small for a {window} x {window} window with reflect padding"
        )
    mu_a = _box_mean(a, window)
    mu_b = _box_mean(b, window)
    var_a = _box_mean(a * a, window) - mu_a * mu_a
    var_b = _box_mean(b * b, window) - mu_b * mu_b
    cov = _box_mean(a * b, window) - mu_a * mu_b
    ssim_map = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return float(ssim_map.mean())


@dataclass
class SegmentationReport:
    """Per-utterance metric rows plus their arithmetic mean."""

    gdice: float
    f1: float
    iou: float
    fbound: float
    ssim: float
    per_utterance: list[dict] = field(default_factory=list)
    n_items: int = 0


def evaluate_dataset(
    preds: list[Heatmap | BinaryMask],
    gts: list[BinaryMask],
    quantile: float = 0.95,
    ids: list[str] | None = None,
    fbound_tol: int = FBOUND_DEFAULT_TOL,
    ssim_on_heatmap: bool = True,
) -> SegmentationReport:
    """Binarize each heatmap at ``quantile`` and score it against its mask.

    Predictions that are already binary masks are used as-is.  SSIM compares
    the continuous heatmap against the 0/1 ground truth by default; set
    ``ssim_on_heatmap=False`` to compare binarized masks instead.
    """
    if not preds or len(preds) != len(gts):
        raise InvalidInputError(
            f"need equal-length non-empty lists, got {len(preds)} preds / {len(gts)} gts"
        )
    if ids is None:
        ids = [f"item{i:04d}" for i in range(len(preds))]
    rows = []
    for uid, h, gt in zip(ids, preds, gts):
        if h.shape != gt.shape:
            raise InvalidInputError(f"{uid}: heatmap {h.shape} vs mask {gt.shape}")
        if isinstance(h, BinaryMask):
            pred_mask = h
            ssim_pred = h.data.astype(np.float64)
        else:
            pred_mask = binarize(h, quantile)
            ssim_pred = h.data if ssim_on_heatmap else pred_mask.data.astype(np.float64)
        rows.append(
            {
                "utterance_id": uid,
                "gdice": gdice(pred_mask, gt),
                "f1": f1(pred_mask, gt),
                "iou": iou(pred_mask, gt),
                "fbound": fbound(pred_mask, gt, fbound_tol),
                "ssim": ssim(ssim_pred, gt.data.astype(np.float64)),
            }
        )
    rows.sort(key=lambda r: r["utterance_id"])
    means = {m: float(np.mean([r[m] for r in rows])) for m in METRIC_COLUMNS}
    return SegmentationReport(per_utterance=rows, n_items=len(rows), **means)


def write_segmentation_csv(report: SegmentationReport, path: str | Path) -> None:
    """One row per utterance plus an aggregate row, values x100 at 2 decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("utterance_id",) + METRIC_COLUMNS)
    for row in report.per_utterance:
        writer.writerow([row["utterance_id"]] + [f"{row[m] * 100:.2f}" for m in METRIC_COLUMNS])
    writer.writerow(["aggregate"] + [f"{getattr(report, m) * 100:.2f}" for m in METRIC_COLUMNS])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def write_segmentation_json(report: SegmentationReport, path: str | Path) -> None:
    payload = {
        "n_items": report.n_items,
        "aggregate": {m: getattr(report, m) * 100 for m in METRIC_COLUMNS},
        "per_utterance": [
            {"utterance_id": r["utterance_id"], **{m: r[m] * 100 for m in METRIC_COLUMNS}}
            for r in report.per_utterance
        ],
    }
    atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode("utf-8"))
