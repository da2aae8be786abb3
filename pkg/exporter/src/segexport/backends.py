"""Model backends: instance segmentation and dense optical flow.

Concrete adapters wrap pretrained torchvision models when they are locally
available; anything implementing the two protocols below plugs in the same
way (the tests use deterministic stubs).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np


class ModelUnavailableError(RuntimeError):
    """Raised when a pretrained model cannot be loaded in this environment."""


@dataclass(frozen=True)
class Detection:
    mask: np.ndarray       # (H, W) bool or {0,1}
    confidence: float
    category: str = ""


class InstanceSegmenter(Protocol):
    def detect(self, frame: np.ndarray) -> list[Detection]:
        """Instance masks with confidences for an (H, W, 3) uint8 RGB frame."""


class DenseFlowEstimator(Protocol):
    def backward_flow(self, cur: np.ndarray, prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) displacement from each pixel of `cur` to its match in `prev`."""


class TorchvisionMaskRCNN:
    """Pretrained Mask R-CNN adapter; requires torchvision weights on this machine."""

    def __init__(self, weights: str = "DEFAULT", mask_threshold: float = 0.5):
        try:
            import torch
            import torchvision
            from torchvision.models.detection import maskrcnn_resnet50_fpn
        except ImportError as exc:
            raise ModelUnavailableError(f"torchvision is not installed: {exc}") from exc
        try:
            self._model = maskrcnn_resnet50_fpn(weights=weights)
        except Exception as exc:
            raise ModelUnavailableError(f"could not load Mask R-CNN weights: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self._mask_threshold = mask_threshold
        try:
            categories = torchvision.models.detection.MaskRCNN_ResNet50_FPN_Weights.DEFAULT.meta["categories"]
        except Exception:
            categories = []
        self._categories = categories

    def detect(self, frame: np.ndarray) -> list[Detection]:
        torch = self._torch
        tensor = torch.from_numpy(np.ascontiguousarray(frame)).permute(2, 0, 1).float() / 255.0
        with torch.no_grad():
            output = self._model([tensor])[0]
        detections = []
        for mask, score, label in zip(output["masks"], output["scores"], output["labels"]):
            support = (mask[0].numpy() > self._mask_threshold)
            name = (self._categories[int(label)]
                    if 0 <= int(label) < len(self._categories) else str(int(label)))
            detections.append(Detection(mask=support, confidence=float(score), category=name))
        return detections


class TorchvisionRaft:
    """Pretrained RAFT adapter producing backward flow (current -> previous)."""

    def __init__(self, weights: str = "DEFAULT"):
        try:
            import torch
            from torchvision.models.optical_flow import raft_small
        except ImportError as exc:
            raise ModelUnavailableError(f"torchvision is not installed: {exc}") from exc
        try:
            self._model = raft_small(weights=weights)
        except Exception as exc:
            raise ModelUnavailableError(f"could not load RAFT weights: {exc}") from exc
        self._model.eval()
        self._torch = torch

    def backward_flow(self, cur: np.ndarray, prev: np.ndarray):
        torch = self._torch

        def prep(img):
            t = torch.from_numpy(np.ascontiguousarray(img)).permute(2, 0, 1).float()
            return (t / 127.5 - 1.0).unsqueeze(0)

        with torch.no_grad():
            # flow is estimated from the first image to the second, so passing
            # (cur, prev) yields the backward field the pipeline expects
            flows = self._model(prep(cur), prep(prev))
        uv = flows[-1][0].numpy()
        return uv[0], uv[1]
