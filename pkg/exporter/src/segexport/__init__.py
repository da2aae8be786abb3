"""Bridges pretrained vision models to the segmentation pipeline's file formats."""

from .backends import (Detection, ModelUnavailableError, TorchvisionMaskRCNN,
                       TorchvisionRaft)
from .export import DEFAULT_EXPORT_FLOOR, ExportManifest, export_flow, export_proposals

__version__ = "0.1.0"
