"""Forward propagation refinement: blend current-frame evidence with the
segmentations of the last n frames, tracked into the current frame.

The buffer stores the last n post-propagation masks, each kept in the
coordinate frame of the most recently processed frame; every new frame's
backward flow re-warps the whole buffer (chained per-step warps). The
accumulated prior is the warped-mask average, so it stays a valid [0, 1]
map regardless of n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BinaryMask, FlowField, PipelineConfig, ScalarMap, check_same_shape
from .flow import warp_mask
from .masks import binarize, dilate, fuse

__all__ = [
    "MaskBuffer",
    "warp_buffer",
    "advance_buffer",
    "accumulated_prior",
    "refine_motion_map",
    "refine_objectness_map",
    "refined_segmentation",
]


@dataclass(frozen=True)
class MaskBuffer:
    """Up to `capacity` masks, oldest first, all in the current frame's coordinates."""

    capacity: int
    masks: tuple[BinaryMask, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError(f"capacity must be >= 0: {self.capacity}")
        masks = tuple(self.masks)
        if len(masks) > self.capacity:
            raise ValueError(f"buffer holds {len(masks)} masks, capacity {self.capacity}")
        for m in masks[1:]:
            check_same_shape(masks[0], m, "buffered mask")
        object.__setattr__(self, "masks", masks)

    def __len__(self) -> int:
        return len(self.masks)


def warp_buffer(buf: MaskBuffer, flow: FlowField) -> MaskBuffer:
    """Track every buffered mask into the new frame via its backward flow."""
    return MaskBuffer(buf.capacity, tuple(warp_mask(m, flow) for m in buf.masks))


def push_mask(buf: MaskBuffer, new_mask: BinaryMask) -> MaskBuffer:
    """Append the newest mask, dropping the oldest beyond capacity."""
    if buf.capacity == 0:
        return buf
    masks = buf.masks + (new_mask,)
    return MaskBuffer(buf.capacity, masks[-buf.capacity:])


def advance_buffer(buf: MaskBuffer, flow: FlowField, new_mask: BinaryMask) -> MaskBuffer:
    """Warp the whole buffer by the new frame's flow, then append its mask."""
    return push_mask(warp_buffer(buf, flow), new_mask)


def accumulated_prior(buf: MaskBuffer) -> ScalarMap:
    """Average of the buffered (already warped) masks; empty buffer is an error."""
    if len(buf) == 0:
        raise ValueError("accumulated prior of an empty buffer")
    total = np.zeros((buf.masks[0].height, buf.masks[0].width), dtype=np.float64)
    for m in buf.masks:
        total += m.labels
    return ScalarMap(total / len(buf))


def refine_motion_map(raw: ScalarMap, prior: ScalarMap, theta: float) -> ScalarMap:
    """Convex blend theta * raw + (1 - theta) * prior."""
    check_same_shape(raw, prior, "prior")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta out of range (0, 1]: {theta}")
    return ScalarMap(theta * raw.values + (1.0 - theta) * prior.values)


def refine_objectness_map(raw_mask: BinaryMask, prior: ScalarMap, theta: float) -> ScalarMap:
    """Same blend with the binary objectness mask lifted to {0, 1} reals."""
    check_same_shape(raw_mask, prior, "prior")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta out of range (0, 1]: {theta}")
    return ScalarMap(theta * raw_mask.labels.astype(np.float64) + (1.0 - theta) * prior.values)


def refined_segmentation(s_bar: ScalarMap, o_bar: ScalarMap, cfg: PipelineConfig) -> BinaryMask:
    """Fuse the refined motion and objectness maps into the frame's segmentation."""
    check_same_shape(s_bar, o_bar, "objectness map")
    motion = binarize(s_bar, cfg.otsu_levels_motion)
    objectness = binarize(o_bar, cfg.otsu_levels_object)
    return fuse(motion, objectness, cfg.dilate_radius)
