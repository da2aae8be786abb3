"""Synthetic sequences with exact ground truth for desk-scale end-to-end tests.

A uniformly colored square translates over a static textured background.
Everything the pipeline ingests is generated: frames, ground-truth masks,
backward flow, and proposal files (optionally degraded), plus the classic
failure-mode props: a stationary high-confidence distractor object and a
dynamic-background region whose flow is pure noise.

Ground-truth backward flow carries -velocity on the union of the square's
current and previous support. Putting the square's motion on the just-revealed
trailing strip as well keeps mask warping self-consistent: warping mask t-1 by
flow t reproduces mask t exactly for integer velocities.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import BinaryMask, FlowField, Frame
from .flow import write_flo
from .masks import disk_element
from .proposals import InstanceProposal, ProposalSet, save_proposals

__all__ = [
    "SynthParams",
    "SynthDataset",
    "synth_sequence",
    "write_dataset",
    "frame_id",
]

SQUARE_COLOR = (220, 40, 30)
DISTRACTOR_COLOR = (40, 220, 60)


def frame_id(index: int) -> str:
    return f"{index:05d}"


@dataclass(frozen=True)
class SynthParams:
    width: int = 64
    height: int = 64
    frame_count: int = 20
    square_size: int = 16
    start: tuple[int, int] = (4, 24)
    velocity: tuple[int, int] = (2, 0)
    background_texture_seed: int = 7
    dynamic_background: tuple[int, int, int, int] | None = None  # (x, y, w, h) region
    dynamic_noise_amplitude: float = 2.0
    outlier_patches: int = 0  # scattered flow artifacts moving like the square
    outlier_patch_size: int = 4
    proposal_confidence: float = 0.9
    proposal_confidence_jitter: float = 0.0
    proposal_erosion: int = 0
    extra_static_object: bool = False
    distractor_rect: tuple[int, int, int, int] = (44, 48, 12, 12)  # clear of the dilated square path

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise ValueError("dimensions and frame count must be positive")
        if self.square_size < 1:
            raise ValueError("square_size must be >= 1")
        for t in range(self.frame_count):
            x = self.start[0] + t * self.velocity[0]
            y = self.start[1] + t * self.velocity[1]
            if not (0 <= x and x + self.square_size <= self.width
                    and 0 <= y and y + self.square_size <= self.height):
                raise ValueError(f"square exits bounds at frame {t}: ({x},{y})")


@dataclass(frozen=True)
class SynthDataset:
    params: SynthParams
    frames: tuple[Frame, ...]
    gt_masks: tuple[BinaryMask, ...]
    flows: tuple[FlowField, ...]  # flows[t] is the backward flow of frame t, t >= 1
    proposals: tuple[ProposalSet, ...]


def _square_support(params: SynthParams, t: int) -> np.ndarray:
    mask = np.zeros((params.height, params.width), dtype=bool)
    x = params.start[0] + t * params.velocity[0]
    y = params.start[1] + t * params.velocity[1]
    mask[y:y + params.square_size, x:x + params.square_size] = True
    return mask


def _rect_support(params: SynthParams, rect: tuple[int, int, int, int]) -> np.ndarray:
    x, y, w, h = rect
    mask = np.zeros((params.height, params.width), dtype=bool)
    mask[y:y + h, x:x + w] = True
    return mask


def _textured_background(params: SynthParams, rng: np.random.Generator) -> np.ndarray:
    """Blocky color cells plus per-pixel jitter, with the red band reserved for the square.

    Coherent cell colors keep the refinement stage's color models meaningful
    (an i.i.d. noise background is equally likely under any model), and the
    jitter gives block matching texture to lock onto.
    """
    cell = 8
    gh = -(-params.height // cell)
    gw = -(-params.width // cell)
    cells = np.stack([
        rng.integers(20, 120, size=(gh, gw)),
        rng.integers(40, 226, size=(gh, gw)),
        rng.integers(40, 226, size=(gh, gw)),
    ], axis=2)
    img = np.repeat(np.repeat(cells, cell, axis=0), cell, axis=1)[:params.height, :params.width]
    img = img + rng.integers(-12, 13, size=(params.height, params.width, 3))
    return np.clip(img, 0, 255).astype(np.int32)


def _swept_band(params: SynthParams) -> np.ndarray:
    band = np.zeros((params.height, params.width), dtype=bool)
    for t in range(params.frame_count):
        band |= _square_support(params, t)
    return band


def _outlier_patch_support(params: SynthParams, rng: np.random.Generator) -> np.ndarray:
    """Scattered patches clear of the square's swept path and the distractor."""
    forbidden = _swept_band(params)
    if params.extra_static_object:
        forbidden |= _rect_support(params, params.distractor_rect)
    if params.dynamic_background is not None:
        forbidden |= _rect_support(params, params.dynamic_background)
    support = np.zeros((params.height, params.width), dtype=bool)
    size = params.outlier_patch_size
    placed = 0
    for _ in range(200):
        if placed >= params.outlier_patches:
            break
        x = int(rng.integers(0, params.width - size + 1))
        y = int(rng.integers(0, params.height - size + 1))
        if forbidden[y:y + size, x:x + size].any():
            continue
        support[y:y + size, x:x + size] = True
        forbidden[y:y + size, x:x + size] = True
        placed += 1
    return support


def synth_sequence(params: SynthParams) -> SynthDataset:
    """Generate frames, ground truth, backward flow, and proposals for one sequence."""
    rng = np.random.default_rng(params.background_texture_seed)
    background = _textured_background(params, rng)
    # the square's jitter pattern travels with it so its texture is motion-consistent
    square_jitter = rng.integers(-35, 36, size=(params.square_size, params.square_size, 3))
    square_patch = np.clip(np.array(SQUARE_COLOR, dtype=np.int32) + square_jitter, 0, 255)
    outliers = _outlier_patch_support(params, rng) if params.outlier_patches else None

    frames = []
    gt_masks = []
    flows: list[FlowField] = []
    proposal_sets = []
    distractor = _rect_support(params, params.distractor_rect) if params.extra_static_object else None

    for t in range(params.frame_count):
        support = _square_support(params, t)
        img = background.copy()
        img[support] = square_patch.reshape(-1, 3)
        if distractor is not None:
            img[distractor] = DISTRACTOR_COLOR
        frames.append(Frame(img.astype(np.uint8)))
        gt_masks.append(BinaryMask(support))

        if t >= 1:
            u = np.zeros((params.height, params.width), dtype=np.float32)
            v = np.zeros((params.height, params.width), dtype=np.float32)
            moving = support | _square_support(params, t - 1)
            u[moving] = -params.velocity[0]
            v[moving] = -params.velocity[1]
            if outliers is not None:
                u[outliers] = -params.velocity[0]
                v[outliers] = -params.velocity[1]
            if params.dynamic_background is not None:
                # water-like sloshing: the region drifts coherently in a random
                # axis-aligned direction each frame. Axis-aligned components
                # keep the drift magnitude exactly representable, so the
                # region is precisely as salient as the tracked object.
                region = _rect_support(params, params.dynamic_background) & ~moving
                amp = params.dynamic_noise_amplitude
                du, dv = ((amp, 0.0), (-amp, 0.0), (0.0, amp), (0.0, -amp))[int(rng.integers(4))]
                u[region] = du
                v[region] = dv
            flows.append(FlowField(u=u, v=v))

        props = []
        confidence = params.proposal_confidence
        if params.proposal_confidence_jitter > 0:
            confidence += rng.uniform(-params.proposal_confidence_jitter,
                                      params.proposal_confidence_jitter)
            confidence = float(np.clip(confidence, 0.0, 1.0))
        prop_mask = support
        if params.proposal_erosion > 0:
            prop_mask = ndimage.binary_erosion(
                support, structure=disk_element(params.proposal_erosion), border_value=0)
        if prop_mask.any():
            props.append(InstanceProposal(mask=BinaryMask(prop_mask),
                                          confidence=confidence, category="moving-square"))
        if distractor is not None:
            props.append(InstanceProposal(mask=BinaryMask(distractor),
                                          confidence=0.95, category="static-distractor"))
        proposal_sets.append(ProposalSet(frame_id=frame_id(t), width=params.width,
                                         height=params.height, proposals=tuple(props)))

    return SynthDataset(params=params, frames=tuple(frames), gt_masks=tuple(gt_masks),
                        flows=tuple(flows), proposals=tuple(proposal_sets))


def write_dataset(dataset: SynthDataset, out_dir: Path | str) -> dict[str, Path]:
    """Write the dataset in the pipeline's ingestion layout; returns the subdirectories."""
    out_dir = Path(out_dir)
    dirs = {
        "frames": out_dir / "frames",
        "flow": out_dir / "flow",
        "proposals": out_dir / "proposals",
        "gt": out_dir / "gt",
    }
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(dataset.frames):
        Image.fromarray(frame.data, mode="RGB").save(dirs["frames"] / f"{frame_id(t)}.png")
    for t, mask in enumerate(dataset.gt_masks):
        Image.fromarray(mask.labels * np.uint8(255), mode="L").save(dirs["gt"] / f"{frame_id(t)}.png")
    for t, flow in enumerate(dataset.flows, start=1):
        (dirs["flow"] / f"{frame_id(t)}.flo").write_bytes(write_flo(flow))
    for props in dataset.proposals:
        save_proposals(dirs["proposals"], props)
    return dirs
