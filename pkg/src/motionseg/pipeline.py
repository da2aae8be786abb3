"""Per-frame orchestration of the full segmentation pipeline.

For every frame after the first: estimate/load backward flow, compute the
salient motion map and mask, load the objectness mask, and fuse them. Once
enough history exists, blend in the propagated previous segmentations before
fusing, and optionally polish the result with the color-model graph cut.
Processing is strictly in frame order; frame t's output depends only on
frames up to t, and identical inputs, configuration, and seed give
bit-identical outputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BinaryMask, PipelineConfig, check_same_shape, validate_config
from .crf import crf_refine
from .dataset import DatasetLayout, LayoutError, write_mask_png
from .flow import BlockMatchParams, estimate_flow
from .masks import binarize, fuse
from .metrics import iou, region_metrics
from .propagation import (MaskBuffer, accumulated_prior, push_mask,
                          refine_motion_map, refine_objectness_map,
                          refined_segmentation, warp_buffer)
from .proposals import load_proposals, objectness_mask
from .saliency import salient_motion_map

__all__ = [
    "StageSelection",
    "run_pipeline",
    "ablation_report",
    "ABLATION_ROWS",
]

ABLATION_ROWS = ("s", "so", "sop", "sopc")


@dataclass(frozen=True)
class StageSelection:
    """Which pipeline stages run; mirrors the ablation rows S / S+O / S+O+P / S+O+P+C."""

    objectness: bool = True
    propagation: bool = True
    crf: bool = True

    def __post_init__(self):
        if self.propagation and not self.objectness:
            raise ValueError("propagation requires the objectness stage")
        if self.crf and not self.objectness:
            raise ValueError("refinement requires at least the fused stage")

    @classmethod
    def from_code(cls, code: str) -> "StageSelection":
        table = {
            "s": cls(objectness=False, propagation=False, crf=False),
            "so": cls(objectness=True, propagation=False, crf=False),
            "sop": cls(objectness=True, propagation=True, crf=False),
            "sopc": cls(objectness=True, propagation=True, crf=True),
        }
        if code not in table:
            raise ValueError(f"unknown stage code {code!r}; expected one of {sorted(table)}")
        return table[code]


def run_pipeline(layout: DatasetLayout, cfg: PipelineConfig, stages: StageSelection,
                 seed: int = 0, block_params: BlockMatchParams | None = None,
                 out_dir=None) -> list[BinaryMask]:
    """Segment every frame of the dataset; returns masks aligned with the frames.

    Frame 0 has no backward flow and emits an all-background placeholder so
    output files stay aligned with input frames. If a flow file is missing and
    the layout carries no flow directory at all, flow comes from the
    block-matching baseline; a missing file inside an existing flow directory
    is estimated with a warning.
    """
    cfg = validate_config(cfg)
    frame_ids = layout.frame_ids()
    if stages.objectness and layout.proposals_dir is None:
        raise LayoutError("objectness stage enabled but the layout has no proposals directory")

    use_propagation = stages.propagation and cfg.enable_propagation and cfg.n_prev > 0
    use_crf = stages.crf and cfg.enable_crf

    outputs: list[BinaryMask] = []
    buffer = MaskBuffer(capacity=cfg.n_prev if use_propagation else 0)
    prev_frame = layout.load_frame(frame_ids[0])
    outputs.append(BinaryMask(np.zeros((prev_frame.height, prev_frame.width), dtype=np.uint8)))

    for index, fid in enumerate(frame_ids[1:], start=1):
        frame = layout.load_frame(fid)
        check_same_shape(prev_frame, frame, f"frame {fid}")

        flow = layout.load_flow(fid)
        if flow is None:
            if layout.flow_dir is not None:
                warnings.warn(f"flow file missing for frame {fid}; falling back to block matching")
            flow = estimate_flow(prev_frame, frame, block_params or BlockMatchParams())
        check_same_shape(frame, flow, f"flow {fid}")

        motion_map = salient_motion_map(flow, cfg, seed=seed + index)
        motion_mask = binarize(motion_map, cfg.otsu_levels_motion)

        if not stages.objectness:
            outputs.append(motion_mask)
            prev_frame = frame
            continue

        props = load_proposals(layout.proposals_dir, fid, frame.width, frame.height)
        obj_mask = objectness_mask(props, cfg.confidence_threshold)
        fused = fuse(motion_mask, obj_mask, cfg.dilate_radius)

        if use_propagation:
            buffer = warp_buffer(buffer, flow)
            # Blending starts once the frame number (1-based) exceeds the
            # history length; earlier frames emit the plain fusion, and the
            # first fused mask seeds the buffer.
            if index + 1 > cfg.n_prev and len(buffer) > 0:
                prior = accumulated_prior(buffer)
                s_bar = refine_motion_map(motion_map, prior, cfg.theta)
                o_bar = refine_objectness_map(obj_mask, prior, cfg.theta)
                mask = refined_segmentation(s_bar, o_bar, cfg)
            else:
                mask = fused
            buffer = push_mask(buffer, mask)
        else:
            mask = fused

        if use_crf:
            mask = crf_refine(frame, mask, cfg, seed=seed + index)

        outputs.append(mask)
        prev_frame = frame

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for fid, mask in zip(frame_ids, outputs):
            write_mask_png(mask, out_dir / f"{fid}.png")
    return outputs


def ablation_report(layout: DatasetLayout, cfg: PipelineConfig, seed: int = 0) -> dict[str, float]:
    """Mean IoU per stage row over the dataset (frame 0 excluded), same inputs per row."""
    if layout.gt_dir is None:
        raise LayoutError("ablation report requires a ground-truth directory")
    frame_ids = layout.frame_ids()
    gts = [layout.load_gt(fid) for fid in frame_ids]
    if any(g is None for g in gts):
        raise LayoutError("ground truth missing for some frames")
    report = {}
    for code in ABLATION_ROWS:
        masks = run_pipeline(layout, cfg, StageSelection.from_code(code), seed=seed)
        ious = [iou(p, g) for p, g in zip(masks[1:], gts[1:])]
        j_mean, _, _ = region_metrics(ious) if len(ious) >= 4 else (float(np.mean(ious)), 0.0, 0.0)
        report[code] = j_mean
    return report
