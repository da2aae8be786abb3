import numpy as np
import pytest

from motionseg.core import BinaryMask, FlowField, PipelineConfig, ScalarMap
from motionseg.propagation import (MaskBuffer, accumulated_prior,
                                   advance_buffer, refine_motion_map,
                                   refine_objectness_map,
                                   refined_segmentation)


def mask_of(arr):
    return BinaryMask(np.asarray(arr, dtype=np.uint8))


def zero_flow(h, w):
    return FlowField(u=np.zeros((h, w)), v=np.zeros((h, w)))


def ones(h, w):
    return mask_of(np.ones((h, w)))


def zeros(h, w):
    return mask_of(np.zeros((h, w)))


def test_advance_into_empty_buffer():
    buf = MaskBuffer(capacity=2)
    m = ones(3, 3)
    out = advance_buffer(buf, zero_flow(3, 3), m)
    assert len(out) == 1
    assert np.array_equal(out.masks[0].labels, m.labels)


def test_advance_zero_flow_keeps_masks():
    rng = np.random.default_rng(0)
    a = mask_of(rng.random((4, 4)) < 0.5)
    b = mask_of(rng.random((4, 4)) < 0.5)
    buf = advance_buffer(MaskBuffer(2), zero_flow(4, 4), a)
    buf = advance_buffer(buf, zero_flow(4, 4), b)
    assert len(buf) == 2
    assert np.array_equal(buf.masks[0].labels, a.labels)
    assert np.array_equal(buf.masks[1].labels, b.labels)


def test_advance_drops_oldest_at_capacity():
    a, b, c = ones(2, 2), zeros(2, 2), ones(2, 2)
    buf = MaskBuffer(2, (a, b))
    out = advance_buffer(buf, zero_flow(2, 2), c)
    assert len(out) == 2
    assert np.array_equal(out.masks[0].labels, b.labels)
    assert np.array_equal(out.masks[1].labels, c.labels)


def test_advance_warps_buffered_masks():
    m = np.zeros((6, 6), dtype=np.uint8)
    m[3, 3] = 1
    buf = MaskBuffer(2, (mask_of(m),))
    flow = FlowField(u=np.ones((6, 6)), v=np.zeros((6, 6)))  # gather from the right
    out = advance_buffer(buf, flow, zeros(6, 6))
    assert out.masks[0].labels[3, 2] == 1
    assert out.masks[0].labels.sum() == 1


def test_capacity_zero_buffer_stays_empty():
    out = advance_buffer(MaskBuffer(0), zero_flow(2, 2), ones(2, 2))
    assert len(out) == 0


def test_prior_of_identical_ones():
    buf = MaskBuffer(2, (ones(3, 3), ones(3, 3)))
    assert np.all(accumulated_prior(buf).values == 1.0)


def test_prior_averages():
    buf = MaskBuffer(2, (ones(3, 3), zeros(3, 3)))
    assert np.all(accumulated_prior(buf).values == 0.5)


def test_prior_single_zero_mask():
    assert np.all(accumulated_prior(MaskBuffer(1, (zeros(2, 2),))).values == 0.0)


def test_prior_empty_buffer_error():
    with pytest.raises(ValueError, match="empty"):
        accumulated_prior(MaskBuffer(3))


def test_refine_motion_theta_one_is_identity():
    rng = np.random.default_rng(1)
    raw = ScalarMap(rng.random((5, 5)))
    prior = ScalarMap(rng.random((5, 5)))
    out = refine_motion_map(raw, prior, 1.0)
    assert np.array_equal(out.values, raw.values)


def test_refine_motion_blend_value():
    raw = ScalarMap(np.full((4, 4), 0.5))
    prior = ScalarMap(np.ones((4, 4)))
    out = refine_motion_map(raw, prior, 0.5)
    assert np.allclose(out.values, 0.75)


def test_refine_fixed_point_when_equal():
    rng = np.random.default_rng(2)
    raw = ScalarMap(rng.random((4, 4)))
    for theta in (0.3, 0.85, 1.0):
        out = refine_motion_map(raw, raw, theta)
        assert np.allclose(out.values, raw.values)


def test_refine_objectness_blend():
    prior = ScalarMap(np.ones((3, 3)))
    out = refine_objectness_map(zeros(3, 3), prior, 0.9)
    assert np.allclose(out.values, 0.1)
    out2 = refine_objectness_map(ones(3, 3), prior, 0.6)
    assert np.allclose(out2.values, 1.0)


def test_refine_is_convex_combination():
    rng = np.random.default_rng(3)
    raw = ScalarMap(rng.random((6, 6)))
    prior = ScalarMap(rng.random((6, 6)))
    out = refine_motion_map(raw, prior, 0.85).values
    lo = np.minimum(raw.values, prior.values)
    hi = np.maximum(raw.values, prior.values)
    assert np.all(out >= lo - 1e-12)
    assert np.all(out <= hi + 1e-12)


def test_refine_rejects_bad_theta_and_shapes():
    raw = ScalarMap(np.zeros((3, 3)))
    with pytest.raises(ValueError, match="theta"):
        refine_motion_map(raw, raw, 0.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        refine_motion_map(raw, ScalarMap(np.zeros((3, 4))), 0.9)


def test_refined_segmentation_zero_motion_absorbs():
    cfg = PipelineConfig()
    s_bar = ScalarMap(np.zeros((6, 6)))
    o_bar = ScalarMap(np.ones((6, 6)))
    assert refined_segmentation(s_bar, o_bar, cfg).count() == 0


def test_refined_segmentation_block_fixed_point():
    cfg = PipelineConfig(dilate_radius=0)
    block = np.zeros((8, 8))
    block[2:5, 2:5] = 1.0
    out = refined_segmentation(ScalarMap(block), ScalarMap(block), cfg)
    assert np.array_equal(out.labels.astype(float), block)


def test_repeated_same_mask_prior_converges_to_mask():
    rng = np.random.default_rng(4)
    m = mask_of(rng.random((5, 5)) < 0.5)
    buf = MaskBuffer(3)
    for _ in range(3):
        buf = advance_buffer(buf, zero_flow(5, 5), m)
    assert np.array_equal(accumulated_prior(buf).values, m.labels.astype(float))


def test_static_sequence_is_a_fixed_point():
    # constant motion evidence + zero flow: refined output stops changing
    cfg = PipelineConfig(dilate_radius=0)
    raw = np.zeros((8, 8))
    raw[3:6, 3:6] = 1.0
    raw_map = ScalarMap(raw)
    obj = mask_of(raw)
    buf = MaskBuffer(cfg.n_prev)
    outputs = []
    for _ in range(6):
        if len(buf):
            prior = accumulated_prior(buf)
            s_bar = refine_motion_map(raw_map, prior, cfg.theta)
            o_bar = refine_objectness_map(obj, prior, cfg.theta)
            mask = refined_segmentation(s_bar, o_bar, cfg)
        else:
            mask = obj
        buf = advance_buffer(buf, zero_flow(8, 8), mask)
        outputs.append(mask)
    for later in outputs[cfg.n_prev:]:
        assert np.array_equal(later.labels, outputs[cfg.n_prev - 1].labels)
