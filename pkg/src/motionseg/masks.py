"""Adaptive multi-level Otsu binarization, disk dilation, and mask fusion.

Binarization quantizes a [0, 1] map into 256 bins and picks the threshold
tuple maximizing between-class variance. Foreground is the class strictly
above the largest threshold (the most conservative split); the dilation that
follows in the fusion stage restores recall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import BinaryMask, ScalarMap, check_same_shape

__all__ = [
    "Histogram256",
    "ThresholdSet",
    "histogram_of",
    "otsu_thresholds",
    "binarize",
    "disk_element",
    "dilate",
    "fuse",
]


@dataclass(frozen=True)
class Histogram256:
    """256-bin histogram of quantized [0, 1] values; bin = floor(value * 255)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.shape != (256,):
            raise ValueError(f"histogram must have exactly 256 bins, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ThresholdSet:
    """Strictly increasing bin-index thresholds t_1 < ... < t_k."""

    thresholds: tuple[int, ...]
    degenerate: bool = False

    def __post_init__(self):
        t = tuple(int(x) for x in self.thresholds)
        if len(t) < 1:
            raise ValueError("at least one threshold required")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {t}")
        if t[0] < 0 or t[-1] > 254:
            raise ValueError(f"thresholds must be bin indices in [0, 254]: {t}")
        object.__setattr__(self, "thresholds", t)

    @property
    def top(self) -> int:
        return self.thresholds[-1]


def histogram_of(scalar: ScalarMap) -> Histogram256:
    bins = np.minimum((scalar.values * 255.0).astype(np.int64), 255)
    return Histogram256(np.bincount(bins.ravel(), minlength=256))


def _class_scores(counts: np.ndarray) -> np.ndarray:
    """scores[a, b] = mass(a..b) * mean(a..b)^2 for inclusive bin ranges; empty ranges score 0.

    Between-class variance equals sum(scores over classes)/total - mu^2, so
    maximizing the score sum maximizes the variance.
    """
    p = np.zeros(257)
    s = np.zeros(257)
    p[1:] = np.cumsum(counts)
    s[1:] = np.cumsum(counts * np.arange(256))
    mass = p[None, 1:] - p[:-1, None]  # mass[a, b] over bins a..b (rows = a)
    first = s[None, 1:] - s[:-1, None]
    # Empty and inverted ranges have mass <= 0 and score 0.
    return np.where(mass > 0, first * first / np.where(mass > 0, mass, 1.0), 0.0)


def otsu_thresholds(hist: Histogram256, k: int) -> ThresholdSet:
    """Threshold tuple maximizing between-class variance over k+1 classes.

    Exhaustive over ordered tuples t_1 < ... < t_k in [0, 254]; evaluated
    exactly by staged maximization over the split points. Ties resolve to the
    lexicographically smallest tuple. A histogram with all mass in one bin is
    degenerate: the result is that bin index (capped at 254), flagged.
    """
    if not 1 <= k <= 4:
        raise ValueError(f"threshold count must be in [1, 4]: {k}")
    counts = hist.counts
    if hist.total == 0:
        raise ValueError("histogram is empty")
    occupied = np.nonzero(counts)[0]
    if occupied.size == 1:
        bin_idx = min(int(occupied[0]), 254)
        return ThresholdSet((bin_idx,), degenerate=True)

    scores = _class_scores(counts.astype(np.float64))

    # best[c][t] = max score over classes c..k+1 given class c starts at bin t.
    # Stage-wise argmax with first-index ties yields the lexicographically
    # smallest maximizing tuple.
    n = 256
    starts = np.arange(n)
    best = scores[starts, 255]  # last class: bins t..255
    choices = []
    for _ in range(k):
        # class from `start` to threshold t, then the best continuation from t+1
        cand = np.full((n, n), -np.inf)
        t = np.arange(n - 1)  # thresholds live in [0, 254]
        cand[:, :-1] = scores[:, :-1] + best[None, t + 1]
        valid = starts[:, None] <= t[None, :]
        cand[:, :-1] = np.where(valid, cand[:, :-1], -np.inf)
        choice = np.argmax(cand, axis=1)
        best = cand[starts, choice]
        choices.append(choice)

    # choices were filled innermost stage first; reconstruct outermost first.
    thresholds = []
    start = 0
    for choice in reversed(choices):
        t = int(choice[start])
        thresholds.append(t)
        start = t + 1
    return ThresholdSet(tuple(thresholds))


def binarize(scalar: ScalarMap, k: int) -> BinaryMask:
    """Adaptive split: foreground = pixels strictly above the largest Otsu threshold.

    Constant maps (no contrast, including all-zero) short-circuit to
    all-background before Otsu runs.
    """
    values = scalar.values
    if values.min() == values.max():
        return BinaryMask(np.zeros(values.shape, dtype=np.uint8))
    ts = otsu_thresholds(histogram_of(scalar), k)
    bins = np.minimum((values * 255.0).astype(np.int64), 255)
    return BinaryMask(bins > ts.top)


def disk_element(r: int) -> np.ndarray:
    """Euclidean disk structuring element: dx^2 + dy^2 <= r^2."""
    if r < 0:
        raise ValueError(f"radius must be >= 0: {r}")
    span = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    return (dx * dx + dy * dy) <= r * r


def dilate(mask: BinaryMask, r: int) -> BinaryMask:
    """Morphological dilation with a Euclidean disk of radius r; r = 0 is identity."""
    if r == 0:
        return mask
    grown = ndimage.binary_dilation(mask.labels.astype(bool), structure=disk_element(r))
    return BinaryMask(grown)


def fuse(salient: BinaryMask, objectness: BinaryMask, r: int) -> BinaryMask:
    """Dilated salient-motion mask intersected with the objectness mask."""
    check_same_shape(salient, objectness, "objectness mask")
    return BinaryMask(dilate(salient, r).labels & objectness.labels)
