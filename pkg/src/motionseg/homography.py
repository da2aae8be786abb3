"""Global homography background model fit on flow-derived correspondences.

The dominant (camera/background) motion between consecutive frames is modeled
by a single 3x3 projective transform, estimated with normalized DLT inside a
RANSAC loop. Pixels whose flow disagrees with the model produce a residual
motion map usable as an alternative saliency source. Foreground cannot be
split off by a fixed residual threshold, so the residual is exported as a
continuous map for the adaptive binarization stage rather than thresholded
here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FlowField, ScalarMap

__all__ = [
    "Correspondences",
    "Homography",
    "RansacParams",
    "DegenerateGeometryError",
    "normalize_points",
    "dlt_homography",
    "symmetric_transfer_error",
    "ransac_homography",
    "residual_motion_map",
    "flow_correspondences",
]


class DegenerateGeometryError(ValueError):
    """Raised when a point configuration cannot support a model fit."""


@dataclass(frozen=True)
class Correspondences:
    """Matched points: x in frame t, x_prev = x + F(x) in frame t-1. Shape (N, 2) each."""

    x: np.ndarray
    x_prev: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.x, dtype=np.float64)
        b = np.ascontiguousarray(self.x_prev, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 2 or a.shape != b.shape:
            raise ValueError(f"correspondences must be matching (N, 2) arrays: {a.shape} / {b.shape}")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("correspondences contain non-finite coordinates")
        object.__setattr__(self, "x", a)
        object.__setattr__(self, "x_prev", b)

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, indices) -> "Correspondences":
        return Correspondences(self.x[indices], self.x_prev[indices])


@dataclass(frozen=True)
class Homography:
    """3x3 projective map x -> x_prev, scale-normalized, full rank."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) > 1e-12:
            m = m / m[2, 2]
        else:
            m = m / np.linalg.norm(m)
        if abs(np.linalg.det(m)) < 1e-9:
            raise DegenerateGeometryError("homography is rank deficient")
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 2) points through the homography with perspective division."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        hom = np.column_stack([pts, np.ones(len(pts))])
        mapped = hom @ self.matrix.T
        w = mapped[:, 2]
        if (np.abs(w) < 1e-12).any():
            raise DegenerateGeometryError("point maps to the plane at infinity")
        return mapped[:, :2] / w[:, None]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class RansacParams:
    inlier_tolerance: float = 3.0
    success_prob: float = 0.99
    max_iterations: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not self.inlier_tolerance > 0:
            raise ValueError(f"inlier_tolerance must be > 0: {self.inlier_tolerance}")
        if not 0.0 < self.success_prob < 1.0:
            raise ValueError(f"success_prob must be in (0, 1): {self.success_prob}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1: {self.max_iterations}")


def normalize_points(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center points at the origin with mean distance sqrt(2); returns (points, T)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2 or (pts == pts[0]).all():
        raise DegenerateGeometryError("need at least 2 distinct points to normalize")
    centroid = pts.mean(axis=0)
    mean_dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if mean_dist == 0.0:
        raise DegenerateGeometryError("all points identical")
    s = np.sqrt(2.0) / mean_dist
    transform = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    normalized = (pts - centroid) * s
    return normalized, transform


def _collinear_triple_exists(points: np.ndarray, tol: float = 1e-9) -> bool:
    n = len(points)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                ab = points[j] - points[i]
                ac = points[k] - points[i]
                area = 0.5 * abs(ab[0] * ac[1] - ab[1] * ac[0])
                if area < tol:
                    return True
    return False


def dlt_homography(corrs: Correspondences) -> Homography:
    """Least-squares homography x -> x_prev via the normalized DLT system."""
    n = len(corrs)
    if n < 4:
        raise DegenerateGeometryError(f"need >= 4 correspondences, got {n}")
    if n == 4 and _collinear_triple_exists(corrs.x):
        raise DegenerateGeometryError("3 of the 4 source points are collinear")
    src, t_src = normalize_points(corrs.x)
    dst, t_dst = normalize_points(corrs.x_prev)
    a = np.zeros((2 * n, 9))
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v
    _, sv, vt = np.linalg.svd(a)
    if sv[7] < 1e-9:
        raise DegenerateGeometryError("DLT system is rank deficient")
    h_norm = vt[-1].reshape(3, 3)
    denorm = np.linalg.inv(t_dst) @ h_norm @ t_src
    return Homography(denorm)


def symmetric_transfer_error(model: Homography, x: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
    """Per-correspondence ||x_prev - H x|| + ||x - H^-1 x_prev|| in pixels."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    x_prev = np.asarray(x_prev, dtype=np.float64).reshape(-1, 2)
    forward = model.apply(x)
    backward = model.inverse().apply(x_prev)
    return (np.sqrt(((forward - x_prev) ** 2).sum(axis=1))
            + np.sqrt(((backward - x) ** 2).sum(axis=1)))


def ransac_homography(corrs: Correspondences,
                      params: RansacParams | None = None) -> tuple[Homography, np.ndarray]:
    """RANSAC fit over minimal 4-samples; returns the refit model and inlier indices.

    Deterministic from params.seed. The iteration budget shrinks adaptively
    from the best inlier ratio; the final model is a DLT refit over the whole
    best consensus set.
    """
    params = params or RansacParams()
    n = len(corrs)
    if n < 4:
        raise DegenerateGeometryError(f"RANSAC needs >= 4 correspondences, got {n}")
    rng = np.random.default_rng(params.seed)
    best_inliers: np.ndarray | None = None
    iteration = 0
    needed = params.max_iterations
    while iteration < min(needed, params.max_iterations):
        iteration += 1
        sample = rng.choice(n, size=4, replace=False)
        try:
            model = dlt_homography(corrs.subset(sample))
            errors = symmetric_transfer_error(model, corrs.x, corrs.x_prev)
        except DegenerateGeometryError:
            continue
        inliers = np.flatnonzero(errors < params.inlier_tolerance)
        if inliers.size >= 4 and (best_inliers is None or inliers.size > best_inliers.size):
            best_inliers = inliers
            ratio = inliers.size / n
            if ratio >= 1.0:
                needed = iteration
            else:
                denom = np.log1p(-ratio ** 4)
                if denom < 0:
                    needed = int(np.ceil(np.log1p(-params.success_prob) / denom))
    if best_inliers is None:
        raise DegenerateGeometryError("no RANSAC sample produced >= 4 inliers")
    refit = dlt_homography(corrs.subset(best_inliers))
    return refit, best_inliers


def flow_correspondences(flow: FlowField, stride: int = 8) -> Correspondences:
    """Sample the flow on a regular grid: x paired with x + F(x)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1: {stride}")
    ys = np.arange(0, flow.height, stride)
    xs = np.arange(0, flow.width, stride)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()]).astype(np.float64)
    u = flow.u[gy.ravel(), gx.ravel()].astype(np.float64)
    v = flow.v[gy.ravel(), gx.ravel()].astype(np.float64)
    prev = pts + np.column_stack([u, v])
    return Correspondences(pts, prev)


def residual_motion_map(flow: FlowField, model: Homography) -> ScalarMap:
    """Pixel-wise distance between where the flow points and where the model points.

    Min-max normalized, so a flow exactly induced by the model yields an
    all-zero map.
    """
    h, w = flow.height, flow.width
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float64)
    observed = pts + np.column_stack([flow.u.ravel(), flow.v.ravel()]).astype(np.float64)
    predicted = model.apply(pts)
    residual = np.sqrt(((observed - predicted) ** 2).sum(axis=1)).reshape(h, w)
    lo, hi = residual.min(), residual.max()
    # Residuals everywhere below float32 coordinate resolution are model noise,
    # not motion; normalizing them would amplify rounding into a full-scale map.
    if hi == lo or hi < 1e-6:
        return ScalarMap(np.zeros((h, w)))
    return ScalarMap((residual - lo) / (hi - lo))
