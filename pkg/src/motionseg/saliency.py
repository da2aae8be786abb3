"""Salient motion from optical flow.

The flow field is encoded as a 3-channel feature image (u, v, magnitude,
each min-max normalized), and saliency is the minimum barrier distance from
the image boundary: the cost of a path is the largest per-channel spread
(path max minus path min) along it, and a pixel's distance is the minimum
cost over all 4-connected paths to a seed. Pixels whose flow matches the
border can be reached cheaply and score low; independently moving regions
must cross a feature jump and score high.

Two cross-checks ship with the fast raster-scan transform: an exact
Dijkstra-style oracle for tiny instances, and the literal global-contrast
sum (per-pixel total feature distance to all other pixels).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .core import FlowField, PipelineConfig, SaliencySource, ScalarMap

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a normal install, this is a safety net
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

__all__ = [
    "FeatureImage",
    "SeedSet",
    "boundary_seeds",
    "encode_flow_features",
    "mbd_saliency",
    "mbd_distances",
    "exact_barrier_distance",
    "exact_barrier_distances",
    "global_contrast",
    "salient_motion_map",
]

ORACLE_PIXEL_LIMIT = 256
CONTRAST_PIXEL_LIMIT = 16384


@dataclass(frozen=True)
class FeatureImage:
    """Per-pixel flow features, 3 channels each normalized to [0, 1]."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.float64)
        if ch.ndim != 3 or ch.shape[2] != 3:
            raise ValueError(f"feature image must be (H, W, 3), got {ch.shape}")
        if not np.isfinite(ch).all():
            raise ValueError("feature image contains non-finite values")
        if ch.min() < 0.0 or ch.max() > 1.0:
            raise ValueError("feature channels must lie in [0, 1]")
        ch.flags.writeable = False
        object.__setattr__(self, "channels", ch)

    @property
    def height(self) -> int:
        return self.channels.shape[0]

    @property
    def width(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class SeedSet:
    """Background seed coordinates as (x, y) pairs."""

    coords: tuple[tuple[int, int], ...]

    def __post_init__(self):
        coords = tuple((int(x), int(y)) for x, y in self.coords)
        if not coords:
            raise ValueError("seed set must be non-empty")
        object.__setattr__(self, "coords", coords)

    def validate_bounds(self, width: int, height: int) -> None:
        for x, y in self.coords:
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(f"seed ({x},{y}) outside {width}x{height}")


def boundary_seeds(width: int, height: int) -> SeedSet:
    """All image-boundary pixels (the background prior of the distance transform)."""
    coords = set()
    for x in range(width):
        coords.add((x, 0))
        coords.add((x, height - 1))
    for y in range(height):
        coords.add((0, y))
        coords.add((width - 1, y))
    return SeedSet(tuple(sorted(coords)))


def _minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def encode_flow_features(flow: FlowField) -> FeatureImage:
    """Channels: u, v, magnitude; each min-max normalized (constant channel -> zeros)."""
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    mag = np.sqrt(u * u + v * v)
    stacked = np.stack([_minmax_normalize(u), _minmax_normalize(v), _minmax_normalize(mag)], axis=2)
    return FeatureImage(stacked)


@njit(cache=True)
def _raster_pass(feat, dist, lo, hi, forward):  # pragma: no cover - exercised via wrapper
    h, w, c = feat.shape
    step = 1 if forward else -1
    for i in range(h):
        y = i if forward else h - 1 - i
        for j in range(w):
            x = j if forward else w - 1 - j
            # Predecessors behind the scan direction: same-row, then same-column.
            for k in range(2):
                if k == 0:
                    qy, qx = y, x - step
                else:
                    qy, qx = y - step, x
                if qx < 0 or qx >= w or qy < 0 or qy >= h:
                    continue
                cand = 0.0
                for ch in range(c):
                    u = hi[qy, qx, ch]
                    if feat[y, x, ch] > u:
                        u = feat[y, x, ch]
                    l = lo[qy, qx, ch]
                    if feat[y, x, ch] < l:
                        l = feat[y, x, ch]
                    b = u - l
                    if b > cand:
                        cand = b
                if cand < dist[y, x]:
                    dist[y, x] = cand
                    for ch in range(c):
                        u = hi[qy, qx, ch]
                        if feat[y, x, ch] > u:
                            u = feat[y, x, ch]
                        l = lo[qy, qx, ch]
                        if feat[y, x, ch] < l:
                            l = feat[y, x, ch]
                        hi[y, x, ch] = u
                        lo[y, x, ch] = l


def mbd_distances(feat: FeatureImage, seeds: SeedSet, passes: int = 3) -> np.ndarray:
    """Raw (unnormalized) raster-scan barrier distances to the seed set."""
    if passes < 1:
        raise ValueError(f"passes must be >= 1: {passes}")
    seeds.validate_bounds(feat.width, feat.height)
    ch = feat.channels
    dist = np.full((feat.height, feat.width), np.inf)
    lo = ch.copy()
    hi = ch.copy()
    for x, y in seeds.coords:
        dist[y, x] = 0.0
    for _ in range(passes):
        _raster_pass(ch, dist, lo, hi, True)
        _raster_pass(ch, dist, lo, hi, False)
    # Pixels unreachable from any seed keep an infinite distance only on
    # degenerate single-pixel images; clamp for safety.
    dist[~np.isfinite(dist)] = 1.0
    return dist


def mbd_saliency(feat: FeatureImage, seeds: SeedSet, passes: int = 3) -> ScalarMap:
    """Approximate minimum barrier distance, min-max normalized to [0, 1]."""
    return ScalarMap(_minmax_normalize(mbd_distances(feat, seeds, passes)))


def exact_barrier_distances(feat: FeatureImage, seeds: SeedSet) -> np.ndarray:
    """Exact raw barrier distances by search over (pixel, per-channel min/max) states.

    Interval states only widen along a path, so a best-first expansion pops
    each pixel first at its true distance; dominated interval states are
    pruned to keep the frontier small. Oracle scale only.
    """
    h, w = feat.height, feat.width
    if w * h > ORACLE_PIXEL_LIMIT:
        raise ValueError(f"instance too large for the exact oracle: {w}x{h} > {ORACLE_PIXEL_LIMIT} px")
    seeds.validate_bounds(w, h)
    ch = feat.channels
    dist = np.full((h, w), np.inf)
    # Pareto frontier per pixel: list of (hi, lo) channel-interval tuples.
    frontier: list[list[tuple[tuple[float, ...], tuple[float, ...]]]] = [[] for _ in range(h * w)]
    heap: list[tuple[float, int, int, int, tuple[float, ...], tuple[float, ...]]] = []
    counter = 0
    for x, y in seeds.coords:
        f = tuple(ch[y, x])
        heapq.heappush(heap, (0.0, counter, x, y, f, f))
        counter += 1

    while heap:
        cost, _, x, y, hi, lo = heapq.heappop(heap)
        states = frontier[y * w + x]
        dominated = any(
            all(ph <= qh for ph, qh in zip(shi, hi)) and all(pl >= ql for pl, ql in zip(slo, lo))
            for shi, slo in states
        )
        if dominated:
            continue
        states.append((hi, lo))
        if cost < dist[y, x]:
            dist[y, x] = cost
        for nx, ny in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            f = ch[ny, nx]
            nhi = tuple(max(a, b) for a, b in zip(hi, f))
            nlo = tuple(min(a, b) for a, b in zip(lo, f))
            ncost = max(a - b for a, b in zip(nhi, nlo))
            heapq.heappush(heap, (ncost, counter, nx, ny, nhi, nlo))
            counter += 1
    return dist


def exact_barrier_distance(feat: FeatureImage, seeds: SeedSet) -> ScalarMap:
    """Exact barrier distance, normalized identically to mbd_saliency."""
    return ScalarMap(_minmax_normalize(exact_barrier_distances(feat, seeds)))


def global_contrast(feat: FeatureImage) -> ScalarMap:
    """Per-pixel sum of feature-space Euclidean distances to every pixel, normalized.

    Quadratic in pixel count; used as an alternative saliency source and as a
    cross-check of the distance-transform route.
    """
    h, w = feat.height, feat.width
    n = h * w
    if n > CONTRAST_PIXEL_LIMIT:
        raise ValueError(f"instance too large for global contrast: {n} > {CONTRAST_PIXEL_LIMIT} px")
    flat = feat.channels.reshape(n, 3)
    sums = np.zeros(n)
    chunk = 2048
    for start in range(0, n, chunk):
        block = flat[start:start + chunk]
        d = block[:, None, :] - flat[None, :, :]
        sums[start:start + chunk] = np.sqrt((d * d).sum(axis=2)).sum(axis=1)
    return ScalarMap(_minmax_normalize(sums.reshape(h, w)))


def salient_motion_map(flow: FlowField, cfg: PipelineConfig, seed: int = 0) -> ScalarMap:
    """Salient motion map for one frame, dispatched on cfg.saliency_source."""
    if cfg.saliency_source is SaliencySource.MBD:
        feat = encode_flow_features(flow)
        return mbd_saliency(feat, boundary_seeds(flow.width, flow.height), passes=3)
    if cfg.saliency_source is SaliencySource.GLOBAL_CONTRAST:
        return global_contrast(encode_flow_features(flow))
    from .homography import RansacParams, flow_correspondences, ransac_homography, residual_motion_map

    corrs = flow_correspondences(flow)
    model, _ = ransac_homography(corrs, RansacParams(seed=seed))
    return residual_motion_map(flow, model)
