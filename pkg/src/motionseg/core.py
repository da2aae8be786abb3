"""Shared value types and pipeline configuration.

All value types wrap numpy arrays that are frozen (non-writeable) after
construction, so instances can be shared freely across threads. Dimension
agreement between types is checked at every cross-type operation; there is
no silent resampling anywhere in the pipeline.

Pixel coordinates are (x, y) with origin at the top-left corner, x growing
rightward and y growing downward. Arrays are indexed [y, x] (row-major).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import numpy as np

__all__ = [
    "Frame",
    "FlowField",
    "ScalarMap",
    "BinaryMask",
    "SaliencySource",
    "PipelineConfig",
    "ConfigError",
    "validate_config",
    "check_same_shape",
]


class ConfigError(ValueError):
    """Raised when a PipelineConfig field violates its invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def check_same_shape(a, b, what: str = "operand") -> None:
    """Raise if two value objects disagree on width/height."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"dimension mismatch: {what} is {b.width}x{b.height}, "
            f"expected {a.width}x{a.height}"
        )


@dataclass(frozen=True)
class Frame:
    """8-bit RGB image, shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"frame data must be (H, W, 3), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def as_float(self) -> np.ndarray:
        """Colors scaled to [0, 1], float64, shape (H, W, 3)."""
        return self.data.astype(np.float64) / 255.0


@dataclass(frozen=True)
class FlowField:
    """Dense backward flow: per-pixel displacement (u, v) into the previous frame.

    Stored as float32 so Middlebury .flo round-trips are bit-exact.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError(f"flow components must be matching 2-D arrays, got {u.shape} / {v.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValueError("flow contains non-finite values")
        object.__setattr__(self, "u", _freeze(u))
        object.__setattr__(self, "v", _freeze(v))

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class ScalarMap:
    """Per-pixel real map in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"scalar map must be 2-D, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("scalar map contains non-finite values")
        lo, hi = values.min(initial=0.0), values.max(initial=0.0)
        if lo < -1e-9 or hi > 1 + 1e-9:
            raise ValueError(f"scalar map values outside [0, 1]: min={lo}, max={hi}")
        if lo < 0.0 or hi > 1.0:
            values = np.clip(values, 0.0, 1.0)
        object.__setattr__(self, "values", _freeze(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel {0, 1} labels; 1 = foreground."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels)
        if labels.dtype != np.bool_ and not np.isin(labels, (0, 1)).all():
            raise ValueError("mask labels must be exactly 0 or 1")
        labels = labels.astype(np.uint8)
        if labels.ndim != 2:
            raise ValueError(f"mask must be 2-D, got {labels.shape}")
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def as_scalar(self) -> ScalarMap:
        return ScalarMap(self.labels.astype(np.float64))

    def count(self) -> int:
        return int(self.labels.sum())


class SaliencySource(str, Enum):
    MBD = "mbd"
    GLOBAL_CONTRAST = "global_contrast"
    HOMOGRAPHY_RESIDUAL = "homography_residual"


# JSON key for the smoothness weight is "lambda"; that name is reserved in
# Python, so the attribute is `lam`.
_JSON_KEYS = {
    "theta": "theta",
    "n_prev": "n_prev",
    "dilate_radius": "dilate_radius",
    "otsu_levels_motion": "otsu_levels_motion",
    "otsu_levels_object": "otsu_levels_object",
    "confidence_threshold": "confidence_threshold",
    "lam": "lambda",
    "beta_override": "beta_override",
    "gmm_components": "gmm_components",
    "enable_propagation": "enable_propagation",
    "enable_crf": "enable_crf",
    "saliency_source": "saliency_source",
}


@dataclass(frozen=True)
class PipelineConfig:
    """All pipeline tunables. Immutable once validated."""

    theta: float = 0.85
    n_prev: int = 2
    dilate_radius: int = 6
    otsu_levels_motion: int = 3
    otsu_levels_object: int = 2
    confidence_threshold: float = 0.5
    lam: float = 50.0
    beta_override: float | None = None
    gmm_components: int = 5
    enable_propagation: bool = True
    enable_crf: bool = True
    saliency_source: SaliencySource = SaliencySource.MBD

    def to_json(self) -> str:
        doc = {}
        for attr, key in _JSON_KEYS.items():
            value = getattr(self, attr)
            if isinstance(value, SaliencySource):
                value = value.value
            doc[key] = value
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        key_to_attr = {key: attr for attr, key in _JSON_KEYS.items()}
        kwargs = {}
        for key, value in doc.items():
            if key not in key_to_attr:
                raise ConfigError(f"unknown config key: {key!r}")
            attr = key_to_attr[key]
            if attr == "saliency_source":
                try:
                    value = SaliencySource(value)
                except ValueError:
                    raise ConfigError(f"saliency_source must be one of "
                                      f"{[s.value for s in SaliencySource]}, got {value!r}") from None
            kwargs[attr] = value
        return validate_config(cls(**kwargs))


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """Return cfg unchanged if every field invariant holds; raise ConfigError otherwise."""
    if not (0.0 < cfg.theta <= 1.0):
        raise ConfigError(f"theta out of range (0, 1]: {cfg.theta}")
    if int(cfg.n_prev) != cfg.n_prev or cfg.n_prev < 0:
        raise ConfigError(f"n_prev must be a non-negative integer: {cfg.n_prev}")
    if int(cfg.dilate_radius) != cfg.dilate_radius or cfg.dilate_radius < 0:
        raise ConfigError(f"dilate_radius negative or non-integer: {cfg.dilate_radius}")
    if int(cfg.otsu_levels_motion) != cfg.otsu_levels_motion or cfg.otsu_levels_motion < 1:
        raise ConfigError(f"otsu_levels_motion must be a positive integer: {cfg.otsu_levels_motion}")
    if int(cfg.otsu_levels_object) != cfg.otsu_levels_object or cfg.otsu_levels_object < 1:
        raise ConfigError(f"otsu_levels_object must be a positive integer: {cfg.otsu_levels_object}")
    if not (0.0 <= cfg.confidence_threshold <= 1.0):
        raise ConfigError(f"confidence_threshold outside [0, 1]: {cfg.confidence_threshold}")
    if cfg.lam < 0:
        raise ConfigError(f"lambda must be >= 0: {cfg.lam}")
    if cfg.beta_override is not None and not cfg.beta_override > 0:
        raise ConfigError(f"beta_override must be > 0 when set: {cfg.beta_override}")
    if int(cfg.gmm_components) != cfg.gmm_components or cfg.gmm_components < 1:
        raise ConfigError(f"gmm_components must be a positive integer: {cfg.gmm_components}")
    if not isinstance(cfg.saliency_source, SaliencySource):
        raise ConfigError(f"saliency_source must be a SaliencySource, got {cfg.saliency_source!r}")
    return cfg
