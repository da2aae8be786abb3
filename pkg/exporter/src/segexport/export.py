"""Batch export of proposals and flow into the pipeline's dataset layout."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .backends import DenseFlowEstimator, InstanceSegmenter
from .formats import frame_files, read_frame, write_flo, write_instance_png, write_sidecar

DEFAULT_EXPORT_FLOOR = 0.05


@dataclass(frozen=True)
class ExportManifest:
    """Where frames come from, where exports go, and the confidence floor.

    The floor is deliberately far below the pipeline's operating threshold
    (0.5 by default) so threshold sweeps happen in the pipeline without
    re-running inference.
    """

    frames_dir: Path
    proposals_dir: Path | None = None
    flow_dir: Path | None = None
    export_floor: float = DEFAULT_EXPORT_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "frames_dir", Path(self.frames_dir))
        for attr in ("proposals_dir", "flow_dir"):
            value = getattr(self, attr)
            if value is not None:
                object.__setattr__(self, attr, Path(value))
        if not 0.0 <= self.export_floor <= 1.0:
            raise ValueError(f"export_floor outside [0, 1]: {self.export_floor}")
        if not self.frames_dir.is_dir():
            raise FileNotFoundError(f"frames directory does not exist: {self.frames_dir}")


def export_proposals(manifest: ExportManifest, detector: InstanceSegmenter) -> int:
    """Write a sidecar + instance PNGs per frame; returns the frame count."""
    if manifest.proposals_dir is None:
        raise ValueError("manifest has no proposals output directory")
    out = manifest.proposals_dir
    out.mkdir(parents=True, exist_ok=True)
    files = frame_files(manifest.frames_dir)
    for path in files:
        frame = read_frame(path)
        frame_id = path.stem
        entries = []
        kept = 0
        for det in detector.detect(frame):
            if det.confidence < manifest.export_floor:
                continue
            if det.mask.shape != frame.shape[:2]:
                raise ValueError(
                    f"detection mask {det.mask.shape} does not match frame "
                    f"{frame.shape[:2]} for {frame_id}")
            mask_file = f"{frame_id}_{kept:03d}.png"
            write_instance_png(det.mask, out / mask_file)
            entries.append({"mask_file": mask_file,
                            "confidence": float(det.confidence),
                            "category": det.category})
            kept += 1
        write_sidecar(out, frame_id, entries)
    return len(files)


def export_flow(manifest: ExportManifest, estimator: DenseFlowEstimator) -> int:
    """Write backward flow `.flo` for every frame after the first; returns the count."""
    if manifest.flow_dir is None:
        raise ValueError("manifest has no flow output directory")
    out = manifest.flow_dir
    out.mkdir(parents=True, exist_ok=True)
    files = frame_files(manifest.frames_dir)
    prev = read_frame(files[0])
    written = 0
    for path in files[1:]:
        cur = read_frame(path)
        if cur.shape != prev.shape:
            raise ValueError(f"frame size changed at {path.name}")
        u, v = estimator.backward_flow(cur, prev)
        write_flo(u, v, out / f"{path.stem}.flo")
        prev = cur
        written += 1
    return written
