"""Region and contour quality metrics for mask sequences.

Region similarity is intersection-over-union; sequence aggregates follow the
common video-segmentation benchmark conventions: recall counts frames above
0.5 IoU, decay is the first-quartile mean minus the last-quartile mean.
Contour accuracy is the F-measure of boundary matching within a pixel
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import BinaryMask, check_same_shape
from .masks import disk_element

__all__ = [
    "SequenceScores",
    "iou",
    "region_metrics",
    "boundary_fmeasure",
    "default_boundary_tolerance",
    "score_sequence",
]


@dataclass(frozen=True)
class SequenceScores:
    per_frame_iou: tuple[float, ...]
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """|pred & gt| / |pred | gt|; two empty masks count as a perfect match."""
    check_same_shape(pred, gt, "ground truth")
    p = pred.labels.astype(bool)
    g = gt.labels.astype(bool)
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, g).sum() / union)


def region_metrics(per_frame_iou) -> tuple[float, float, float]:
    """(mean, recall at IoU > 0.5, first-quartile mean minus last-quartile mean)."""
    ious = np.asarray(list(per_frame_iou), dtype=np.float64)
    if ious.size == 0:
        raise ValueError("no frames to score")
    mean = float(ious.mean())
    recall = float((ious > 0.5).mean())
    if ious.size < 4:
        raise ValueError(f"decay needs at least 4 frames, got {ious.size}")
    q = ious.size // 4
    decay = float(ious[:q].mean() - ious[-q:].mean())
    return mean, recall, decay


def _boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a background 4-neighbor or on the image border."""
    fg = mask.astype(bool)
    inner = ndimage.binary_erosion(fg, structure=disk_element(1), border_value=0)
    return fg & ~inner


def default_boundary_tolerance(width: int, height: int) -> int:
    return max(1, round(0.008 * float(np.hypot(width, height))))


def boundary_fmeasure(pred: BinaryMask, gt: BinaryMask, tolerance: float | None = None) -> float:
    """F-measure of boundary matching within a Euclidean pixel tolerance."""
    check_same_shape(pred, gt, "ground truth")
    if tolerance is None:
        tolerance = default_boundary_tolerance(pred.width, pred.height)
    if tolerance <= 0:
        raise ValueError(f"tolerance must be > 0: {tolerance}")
    bp = _boundary(pred.labels)
    bg = _boundary(gt.labels)
    if not bp.any() and not bg.any():
        return 1.0
    if not bp.any() or not bg.any():
        return 0.0
    span = np.arange(-int(np.floor(tolerance)), int(np.floor(tolerance)) + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    disk = (dx * dx + dy * dy) <= tolerance * tolerance
    # widen each boundary by the tolerance disk and measure overlap fractions
    gt_zone = ndimage.binary_dilation(bg, structure=disk)
    pred_zone = ndimage.binary_dilation(bp, structure=disk)
    precision = float((bp & gt_zone).sum() / bp.sum())
    recall = float((bg & pred_zone).sum() / bg.sum())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_sequence(preds, gts, skip_first: bool = True) -> SequenceScores:
    """Aggregate region and contour metrics over aligned mask sequences.

    The first frame is skipped by default: the pipeline has no flow there and
    emits an all-background placeholder.
    """
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions vs {len(gts)} ground-truth masks")
    start = 1 if skip_first else 0
    ious = [iou(p, g) for p, g in zip(preds[start:], gts[start:])]
    f_scores = [boundary_fmeasure(p, g) for p, g in zip(preds[start:], gts[start:])]
    j_mean, j_recall, j_decay = region_metrics(ious)
    return SequenceScores(
        per_frame_iou=tuple(ious),
        j_mean=j_mean,
        j_recall=j_recall,
        j_decay=j_decay,
        f_mean=float(np.mean(f_scores)),
    )
