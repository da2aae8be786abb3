import numpy as np
import pytest

from motionseg.core import FlowField
from motionseg.homography import (Correspondences, DegenerateGeometryError,
                                  Homography, RansacParams, dlt_homography,
                                  flow_correspondences, normalize_points,
                                  ransac_homography, residual_motion_map,
                                  symmetric_transfer_error)
from motionseg.masks import binarize
from motionseg.core import ScalarMap

H_TRUE = np.array([
    [1.02, 0.01, 3.0],
    [-0.008, 0.99, -2.0],
    [1e-5, -2e-5, 1.0],
])


def apply_h(h, pts):
    hom = np.column_stack([pts, np.ones(len(pts))])
    mapped = hom @ h.T
    return mapped[:, :2] / mapped[:, 2:3]


def test_normalize_points_example():
    pts, t = normalize_points(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert np.allclose(pts, [[-np.sqrt(2), 0.0], [np.sqrt(2), 0.0]])
    # the transform reproduces the normalized points homogeneously
    hom = np.column_stack([[0.0, 2.0], [0.0, 0.0], [1.0, 1.0]])
    assert np.allclose((t @ hom.T).T[:, :2], pts)


def test_normalize_points_mean_distance():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 100, (30, 2))
    normed, _ = normalize_points(pts)
    assert np.allclose(normed.mean(axis=0), 0.0, atol=1e-9)
    assert np.isclose(np.sqrt((normed ** 2).sum(axis=1)).mean(), np.sqrt(2))


def test_normalize_points_identical_error():
    with pytest.raises(DegenerateGeometryError):
        normalize_points(np.array([[3.0, 4.0], [3.0, 4.0]]))


def test_dlt_identity():
    pts = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
    model = dlt_homography(Correspondences(pts, pts))
    assert np.allclose(model.matrix, np.eye(3), atol=1e-9)


def test_dlt_recovers_scaling():
    pts = np.array([[1.0, 1.0], [9.0, 2.0], [2.0, 8.0], [8.0, 9.0]])
    model = dlt_homography(Correspondences(pts, 2.0 * pts))
    expect = np.diag([2.0, 2.0, 1.0])
    assert np.allclose(model.matrix / model.matrix[2, 2], expect, atol=1e-6)


def test_dlt_collinear_sources_rejected():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 1.0]])
    with pytest.raises(DegenerateGeometryError, match="collinear"):
        dlt_homography(Correspondences(pts, pts + 1.0))


def test_dlt_needs_four():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateGeometryError, match=">= 4"):
        dlt_homography(Correspondences(pts, pts))


def test_dlt_invariant_under_common_similarity():
    rng = np.random.default_rng(9)
    pts = rng.uniform(0, 200, (12, 2))
    prev = apply_h(H_TRUE, pts)
    base = dlt_homography(Correspondences(pts, prev)).matrix

    # rotate + scale + translate both sides identically
    c, s = np.cos(0.4), np.sin(0.4)
    sim = np.array([[2.0 * c, -2.0 * s, 15.0], [2.0 * s, 2.0 * c, -7.0], [0.0, 0.0, 1.0]])
    pts_t = apply_h(sim, pts)
    prev_t = apply_h(sim, prev)
    moved = dlt_homography(Correspondences(pts_t, prev_t)).matrix
    # conjugating the base model by the similarity must reproduce the moved fit
    expect = sim @ base @ np.linalg.inv(sim)
    assert np.allclose(moved / moved[2, 2], expect / expect[2, 2], atol=1e-6)


def test_apply_rejects_plane_at_infinity():
    model = Homography(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, -5.0]]))
    with pytest.raises(DegenerateGeometryError, match="infinity"):
        model.apply(np.array([[5.0, 0.0]]))


def test_transfer_error_zero_on_identity():
    model = Homography(np.eye(3))
    err = symmetric_transfer_error(model, np.array([[5.0, 6.0]]), np.array([[5.0, 6.0]]))
    assert err[0] == 0.0


def test_transfer_error_offset():
    model = Homography(np.eye(3))
    err = symmetric_transfer_error(model, np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
    assert np.isclose(err[0], 10.0)  # 5 px in each direction


def test_transfer_error_exact_model_floor():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 300, (40, 2))
    prev = apply_h(H_TRUE, pts)
    err = symmetric_transfer_error(Homography(H_TRUE), pts, prev)
    assert err.max() <= 1e-6


def test_transfer_error_swap_symmetry():
    rng = np.random.default_rng(2)
    pts = rng.uniform(0, 300, (10, 2))
    prev = apply_h(H_TRUE, pts) + rng.normal(0, 1, (10, 2))
    model = Homography(H_TRUE)
    fwd = symmetric_transfer_error(model, pts, prev)
    bwd = symmetric_transfer_error(model.inverse(), prev, pts)
    assert np.allclose(fwd, bwd)


def make_outlier_set(rng, n=200, inlier_frac=0.7, min_outlier_error=10.0):
    n_in = int(n * inlier_frac)
    pts = rng.uniform(0, 400, (n, 2))
    prev = apply_h(H_TRUE, pts)
    model = Homography(H_TRUE)
    count = n - n_in
    bad = np.empty((count, 2))
    placed = 0
    while placed < count:
        cand = rng.uniform(0, 400, (count, 2))
        err = symmetric_transfer_error(model, pts[n_in + placed:], cand[: count - placed])
        keep = err > min_outlier_error
        take = cand[: count - placed][keep]
        bad[placed:placed + len(take)] = take
        placed += len(take)
    prev[n_in:] = bad
    return Correspondences(pts, prev), n_in


def test_ransac_all_inliers():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 400, (60, 2))
    corrs = Correspondences(pts, apply_h(H_TRUE, pts))
    model, inliers = ransac_homography(corrs, RansacParams(seed=0))
    assert len(inliers) == 60
    assert np.allclose(model.matrix / model.matrix[2, 2], H_TRUE / H_TRUE[2, 2], atol=1e-6)


def test_ransac_with_outliers():
    rng = np.random.default_rng(4)
    corrs, n_in = make_outlier_set(rng)
    model, inliers = ransac_homography(corrs, RansacParams(seed=1))
    got = set(inliers.tolist())
    true_in = set(range(n_in))
    assert len(got & true_in) / n_in >= 0.95
    assert len(got - true_in) / (len(corrs) - n_in) <= 0.02
    assert np.allclose(model.matrix / model.matrix[2, 2], H_TRUE / H_TRUE[2, 2], atol=1e-6)


def test_ransac_inlier_set_quality_with_uniform_outliers():
    # 70% exact inliers + 30% unconstrained uniform outliers, 20 seeds:
    # the consensus set keeps the true inliers and admits almost nothing
    for seed in range(20):
        rng = np.random.default_rng(700 + seed)
        n, n_in = 200, 140
        pts = rng.uniform(0, 400, (n, 2))
        prev = apply_h(H_TRUE, pts)
        prev[n_in:] = rng.uniform(0, 400, (n - n_in, 2))
        _, inliers = ransac_homography(Correspondences(pts, prev), RansacParams(seed=seed))
        got = set(inliers.tolist())
        true_in = set(range(n_in))
        assert len(got & true_in) / n_in >= 0.95
        assert len(got - true_in) / (n - n_in) <= 0.02


def test_ransac_needs_four():
    pts = np.zeros((3, 2))
    with pytest.raises(DegenerateGeometryError):
        ransac_homography(Correspondences(pts, pts), RansacParams(seed=0))


def test_ransac_all_degenerate_samples():
    # every source point on one line: no sample can fit a homography
    xs = np.arange(10, dtype=np.float64)
    pts = np.column_stack([xs, 2.0 * xs])
    with pytest.raises(DegenerateGeometryError, match="no RANSAC sample"):
        ransac_homography(Correspondences(pts, pts + 1.0), RansacParams(seed=0, max_iterations=50))


def test_residual_map_zero_for_exact_model():
    h, w = 12, 16
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    mapped = apply_h(H_TRUE, pts)
    u = (mapped[:, 0] - pts[:, 0]).reshape(h, w).astype(np.float32)
    v = (mapped[:, 1] - pts[:, 1]).reshape(h, w).astype(np.float32)
    out = residual_motion_map(FlowField(u=u, v=v), Homography(H_TRUE))
    assert np.all(out.values == 0)


def test_residual_map_zero_flow_identity():
    flow = FlowField(u=np.zeros((8, 8)), v=np.zeros((8, 8)))
    out = residual_motion_map(flow, Homography(np.eye(3)))
    assert np.all(out.values == 0)


def test_residual_map_marks_extra_displacement():
    u = np.zeros((16, 16), dtype=np.float32)
    u[4:9, 4:9] = 5.0
    flow = FlowField(u=u, v=np.zeros_like(u))
    out = residual_motion_map(flow, Homography(np.eye(3)))
    square = u == 5.0
    assert np.all(out.values[square] == 1.0)
    assert np.all(out.values[~square] == 0.0)


def test_residual_ransac_pipeline_recovers_square():
    # dominant static background + moving square: fit, residual, binarize
    u = np.zeros((32, 32), dtype=np.float32)
    u[8:16, 8:16] = 4.0
    flow = FlowField(u=u, v=np.zeros_like(u))
    corrs = flow_correspondences(flow, stride=4)
    model, _ = ransac_homography(corrs, RansacParams(seed=0))
    res = residual_motion_map(flow, model)
    mask = binarize(res, 1)
    assert np.array_equal(mask.labels.astype(bool), u == 4.0)


def test_flow_correspondences_grid():
    flow = FlowField(u=np.ones((16, 24)), v=np.full((16, 24), -2.0))
    corrs = flow_correspondences(flow, stride=8)
    assert len(corrs) == 2 * 3
    assert np.allclose(corrs.x_prev, corrs.x + np.array([1.0, -2.0]))
