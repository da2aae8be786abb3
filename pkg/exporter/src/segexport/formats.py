"""Writers for the segmentation pipeline's ingestion formats.

These mirror the pipeline's documented external interfaces and are kept
self-contained: the exporter talks to the pipeline through files only.

- proposals: per-frame `<frame_id>.json` sidecar
  {"frame_id": str, "proposals": [{"mask_file": str, "confidence": float,
  "category": str}]} next to one single-channel 8-bit PNG per instance
  (0 = background, 255 = support), same dimensions as the frame.
- flow: Middlebury `.flo`; float32 magic 202021.25 ("PIEH"), int32 width and
  height, then row-major interleaved (u, v) float32 pairs, all little-endian.
  Frame t's file holds the backward flow t -> t-1.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

FLO_MAGIC = 202021.25


def write_instance_png(mask: np.ndarray, path: Path) -> None:
    arr = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def write_sidecar(directory: Path, frame_id: str, entries: list[dict]) -> Path:
    doc = {"frame_id": frame_id, "proposals": entries}
    path = directory / f"{frame_id}.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def write_flo(u: np.ndarray, v: np.ndarray, path: Path) -> None:
    u = np.asarray(u, dtype="<f4")
    v = np.asarray(v, dtype="<f4")
    if u.ndim != 2 or u.shape != v.shape:
        raise ValueError(f"flow components must be matching 2-D arrays: {u.shape} / {v.shape}")
    height, width = u.shape
    uv = np.empty((height, width, 2), dtype="<f4")
    uv[:, :, 0] = u
    uv[:, :, 1] = v
    path.write_bytes(struct.pack("<fii", FLO_MAGIC, width, height) + uv.tobytes())


def read_frame(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def frame_files(frames_dir: Path) -> list[Path]:
    files = sorted(Path(frames_dir).glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no frames found in {frames_dir}")
    return files
