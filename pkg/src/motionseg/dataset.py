"""On-disk dataset layout: frame PNGs with optional flow, proposals, and ground truth.

Frame files are 8-bit RGB PNGs named as zero-padded integers (00000.png, ...),
contiguous from 0. A flow directory holds `<id>.flo` backward flow for every
frame except the first; a ground-truth directory holds single-channel 0/255
PNGs named like the frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask, Frame
from .flow import read_flo
from .proposals import read_mask_png, write_mask_png

__all__ = [
    "DatasetLayout",
    "LayoutError",
    "read_frame_png",
    "write_frame_png",
    "read_mask_png",
    "write_mask_png",
]


class LayoutError(ValueError):
    """Raised when the on-disk layout violates the dataset contract."""


def read_frame_png(path: Path | str) -> Frame:
    with Image.open(path) as img:
        return Frame(np.asarray(img.convert("RGB")))


def write_frame_png(frame: Frame, path: Path | str) -> None:
    Image.fromarray(frame.data, mode="RGB").save(path)


@dataclass(frozen=True)
class DatasetLayout:
    frames_dir: Path
    flow_dir: Path | None = None
    proposals_dir: Path | None = None
    gt_dir: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames_dir", Path(self.frames_dir))
        for attr in ("flow_dir", "proposals_dir", "gt_dir"):
            value = getattr(self, attr)
            if value is not None:
                object.__setattr__(self, attr, Path(value))

    def frame_ids(self) -> list[str]:
        """Sorted frame ids, validated contiguous from 0."""
        if not self.frames_dir.is_dir():
            raise LayoutError(f"frames directory does not exist: {self.frames_dir}")
        stems = sorted(p.stem for p in self.frames_dir.glob("*.png"))
        if not stems:
            raise LayoutError(f"no frames found in {self.frames_dir}")
        for i, stem in enumerate(stems):
            if not stem.isdigit() or int(stem) != i:
                raise LayoutError(f"frame ids must be contiguous from 0; found {stem} at position {i}")
        return stems

    def frame_path(self, fid: str) -> Path:
        return self.frames_dir / f"{fid}.png"

    def flow_path(self, fid: str) -> Path | None:
        return None if self.flow_dir is None else self.flow_dir / f"{fid}.flo"

    def gt_path(self, fid: str) -> Path | None:
        return None if self.gt_dir is None else self.gt_dir / f"{fid}.png"

    def load_frame(self, fid: str) -> Frame:
        return read_frame_png(self.frame_path(fid))

    def load_flow(self, fid: str):
        path = self.flow_path(fid)
        if path is None or not path.exists():
            return None
        return read_flo(path.read_bytes())

    def load_gt(self, fid: str) -> BinaryMask | None:
        path = self.gt_path(fid)
        if path is None or not path.exists():
            return None
        return read_mask_png(path)
