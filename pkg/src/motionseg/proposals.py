"""Instance-proposal ingestion and the binary objectness mask.

Per-frame proposals arrive as a `<frame_id>.json` sidecar next to one
single-channel 8-bit PNG per instance (0 = background, 255 = support).
A missing sidecar means the detector emitted nothing for that frame and is
not an error; the propagation stage covers such frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask

__all__ = [
    "ProposalFormatError",
    "InstanceProposal",
    "ProposalSet",
    "load_proposals",
    "save_proposals",
    "objectness_mask",
    "read_mask_png",
    "write_mask_png",
]


class ProposalFormatError(ValueError):
    """Raised for malformed sidecars or mask files."""


def read_mask_png(path: Path | str) -> BinaryMask:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BinaryMask(arr > 127)


def write_mask_png(mask: BinaryMask, path: Path | str) -> None:
    Image.fromarray(mask.labels * np.uint8(255), mode="L").save(path)


@dataclass(frozen=True)
class InstanceProposal:
    mask: BinaryMask
    confidence: float
    category: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ProposalFormatError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class ProposalSet:
    frame_id: str
    width: int
    height: int
    proposals: tuple[InstanceProposal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "proposals", tuple(self.proposals))
        for i, prop in enumerate(self.proposals):
            if (prop.mask.height, prop.mask.width) != (self.height, self.width):
                raise ProposalFormatError(
                    f"proposal {i} of frame {self.frame_id}: mask is "
                    f"{prop.mask.width}x{prop.mask.height}, frame is {self.width}x{self.height}"
                )


def load_proposals(directory: Path | str, frame_id: str, width: int, height: int) -> ProposalSet:
    """Parse the frame's sidecar; a missing sidecar yields an empty set."""
    sidecar = Path(directory) / f"{frame_id}.json"
    if not sidecar.exists():
        return ProposalSet(frame_id=frame_id, width=width, height=height)
    try:
        doc = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise ProposalFormatError(f"malformed proposal sidecar {sidecar}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("proposals"), list):
        raise ProposalFormatError(f"proposal sidecar {sidecar} must hold a 'proposals' list")
    proposals = []
    for i, entry in enumerate(doc["proposals"]):
        try:
            mask_file = entry["mask_file"]
            confidence = float(entry["confidence"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProposalFormatError(f"entry {i} of {sidecar} is malformed: {exc}") from exc
        if not 0.0 <= confidence <= 1.0:
            raise ProposalFormatError(f"entry {i} of {sidecar}: confidence outside [0, 1]: {confidence}")
        mask = read_mask_png(Path(directory) / mask_file)
        if (mask.height, mask.width) != (height, width):
            raise ProposalFormatError(
                f"entry {i} of {sidecar}: mask {mask_file} is {mask.width}x{mask.height}, "
                f"frame is {width}x{height}"
            )
        proposals.append(InstanceProposal(mask=mask, confidence=confidence,
                                          category=str(entry.get("category", ""))))
    return ProposalSet(frame_id=frame_id, width=width, height=height, proposals=tuple(proposals))


def save_proposals(directory: Path | str, proposals: ProposalSet) -> None:
    """Write the sidecar + one mask PNG per instance in the ingestion format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, prop in enumerate(proposals.proposals):
        mask_file = f"{proposals.frame_id}_{i:03d}.png"
        write_mask_png(prop.mask, directory / mask_file)
        entries.append({"mask_file": mask_file, "confidence": prop.confidence,
                        "category": prop.category})
    doc = {"frame_id": proposals.frame_id, "proposals": entries}
    (directory / f"{proposals.frame_id}.json").write_text(json.dumps(doc, indent=2))


def objectness_mask(proposals: ProposalSet, confidence_threshold: float) -> BinaryMask:
    """Pixel-wise union of all proposals at or above the confidence threshold."""
    if not 0.0 <= confidence_threshold <= 1.0:
        raise ValueError(f"confidence threshold outside [0, 1]: {confidence_threshold}")
    union = np.zeros((proposals.height, proposals.width), dtype=np.uint8)
    for prop in proposals.proposals:
        if prop.confidence >= confidence_threshold:
            union |= prop.mask.labels
    return BinaryMask(union)
