"""Optical flow I/O, a block-matching baseline estimator, and flow-based warping.

Flow is backward: field F^t holds, for each pixel of frame t, the displacement
to its matching location in frame t-1. Warping previous-frame data into the
current frame is therefore a gather: out(p) = prev(p + F(p)). Samples that
fall outside the source image yield background (0).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BinaryMask, FlowField, Frame, ScalarMap, check_same_shape

__all__ = [
    "FLO_MAGIC",
    "FlowFormatError",
    "read_flo",
    "write_flo",
    "BlockMatchParams",
    "estimate_flow",
    "WarpSampling",
    "warp_scalar_map",
    "warp_mask",
]

# Middlebury .flo header: float32 202021.25 little-endian == b"PIEH".
FLO_MAGIC = 202021.25


class FlowFormatError(ValueError):
    """Raised for malformed .flo data."""


def read_flo(data: bytes) -> FlowField:
    """Parse Middlebury .flo bytes into a FlowField."""
    if len(data) < 12:
        raise FlowFormatError("not a flow file: shorter than the 12-byte header")
    magic, width, height = struct.unpack_from("<fii", data, 0)
    if magic != FLO_MAGIC:
        raise FlowFormatError("not a flow file: bad magic")
    if width < 1 or height < 1:
        raise FlowFormatError(f"not a flow file: invalid dimensions {width}x{height}")
    expected = 12 + width * height * 8
    if len(data) < expected:
        raise FlowFormatError("unexpected end of flow data")
    if len(data) > expected:
        raise FlowFormatError(f"trailing bytes after flow payload: {len(data) - expected}")
    samples = np.frombuffer(data, dtype="<f4", count=width * height * 2, offset=12)
    uv = samples.reshape(height, width, 2)
    bad = ~np.isfinite(uv)
    if bad.any():
        y, x, _ = np.argwhere(bad)[0]
        raise FlowFormatError(f"invalid flow sample at ({x},{y})")
    return FlowField(u=uv[:, :, 0].copy(), v=uv[:, :, 1].copy())


def write_flo(flow: FlowField) -> bytes:
    """Encode a FlowField as Middlebury .flo bytes (bit-exact round trip)."""
    header = struct.pack("<fii", FLO_MAGIC, flow.width, flow.height)
    uv = np.empty((flow.height, flow.width, 2), dtype="<f4")
    uv[:, :, 0] = flow.u
    uv[:, :, 1] = flow.v
    return header + uv.tobytes()


@dataclass(frozen=True)
class BlockMatchParams:
    """Parameters of the integer-precision block-matching baseline."""

    block_size: int = 5
    search_radius: int = 4
    cost: str = "sad"  # or "ssd"

    def __post_init__(self):
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError(f"block_size must be odd and >= 3: {self.block_size}")
        if self.search_radius < 1:
            raise ValueError(f"search_radius must be >= 1: {self.search_radius}")
        if self.cost not in ("sad", "ssd"):
            raise ValueError(f"cost must be 'sad' or 'ssd': {self.cost}")


def _box_sum(arr: np.ndarray, half: int) -> np.ndarray:
    """Sum over a (2*half+1)^2 window per pixel, edge-replicated."""
    padded = np.pad(arr, half, mode="edge")
    c = np.cumsum(np.cumsum(padded, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    k = 2 * half + 1
    h, w = arr.shape
    return (c[k:k + h, k:k + w] - c[:h, k:k + w]
            - c[k:k + h, :w] + c[:h, :w])


def estimate_flow(prev: Frame, cur: Frame, params: BlockMatchParams | None = None) -> FlowField:
    """Backward flow by exhaustive block matching at integer precision.

    For each pixel of `cur`, picks the displacement within the search window
    minimizing the block cost against `prev`. Ties break toward the smallest
    displacement magnitude, then smallest u, then smallest v, so a constant
    scene yields exactly zero flow.
    """
    params = params or BlockMatchParams()
    check_same_shape(prev, cur, "previous frame")
    h, w = cur.height, cur.width
    if params.block_size > min(h, w):
        raise ValueError(f"block_size {params.block_size} does not fit a {w}x{h} frame")
    half = params.block_size // 2
    r = params.search_radius

    cur_f = cur.data.astype(np.float64)
    prev_pad = np.pad(prev.data.astype(np.float64), ((r, r), (r, r), (0, 0)), mode="edge")

    best_cost = np.full((h, w), np.inf)
    best_u = np.zeros((h, w), dtype=np.float32)
    best_v = np.zeros((h, w), dtype=np.float32)

    # Visit displacements in tie-break priority order so a strict '<' update
    # realizes (cost, |d|^2, u, v) lexicographic selection.
    offsets = [(du, dv) for dv in range(-r, r + 1) for du in range(-r, r + 1)]
    offsets.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[0], d[1]))
    for du, dv in offsets:
        shifted = prev_pad[r + dv:r + dv + h, r + du:r + du + w]
        diff = shifted - cur_f
        per_px = np.abs(diff).sum(axis=2) if params.cost == "sad" else (diff * diff).sum(axis=2)
        cost = _box_sum(per_px, half)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_u[better] = du
        best_v[better] = dv
    return FlowField(u=best_u, v=best_v)


class WarpSampling(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


def _gather_nearest(values: np.ndarray, flow: FlowField) -> np.ndarray:
    h, w = values.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = np.floor(xs + flow.u.astype(np.float64) + 0.5).astype(np.int64)
    sy = np.floor(ys + flow.v.astype(np.float64) + 0.5).astype(np.int64)
    inside = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.zeros_like(values)
    out[inside] = values[sy[inside], sx[inside]]
    return out


def _gather_bilinear(values: np.ndarray, flow: FlowField) -> np.ndarray:
    h, w = values.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + flow.u.astype(np.float64)
    sy = ys + flow.v.astype(np.float64)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros_like(values, dtype=np.float64)
    # Corners outside the source contribute 0 (background).
    for dy, dx, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        cx = x0 + dx
        cy = y0 + dy
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        out[ok] += wgt[ok] * values[cy[ok], cx[ok]]
    return out


def warp_scalar_map(scalar: ScalarMap, flow: FlowField,
                    sampling: WarpSampling = WarpSampling.BILINEAR) -> ScalarMap:
    """Gather scalar(p + F(p)); out-of-bounds samples yield 0."""
    check_same_shape(scalar, flow, "flow")
    if sampling is WarpSampling.NEAREST:
        return ScalarMap(_gather_nearest(scalar.values, flow))
    return ScalarMap(np.clip(_gather_bilinear(scalar.values, flow), 0.0, 1.0))


def warp_mask(mask: BinaryMask, flow: FlowField) -> BinaryMask:
    """Nearest-neighbor warp of a binary mask; output stays in {0, 1}."""
    check_same_shape(mask, flow, "flow")
    return BinaryMask(_gather_nearest(mask.labels.astype(np.float64), flow) > 0.5)
