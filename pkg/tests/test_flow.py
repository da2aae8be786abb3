import struct

import numpy as np
import pytest

from motionseg.core import BinaryMask, FlowField, Frame, ScalarMap
from motionseg.flow import (BlockMatchParams, FlowFormatError, WarpSampling,
                            estimate_flow, read_flo, warp_mask,
                            warp_scalar_map, write_flo)
from motionseg.synth import SynthParams, synth_sequence


def hand_encoded_flo(width, height, samples):
    # built from the published format directly, independent of write_flo
    data = struct.pack("<fii", 202021.25, width, height)
    for u, v in samples:
        data += struct.pack("<ff", u, v)
    return data


def test_read_flo_single_pixel():
    data = hand_encoded_flo(1, 1, [(1.5, -2.0)])
    assert len(data) == 20
    flow = read_flo(data)
    assert (flow.width, flow.height) == (1, 1)
    assert flow.u[0, 0] == 1.5
    assert flow.v[0, 0] == -2.0


def test_read_flo_bad_magic():
    data = b"XXXX" + struct.pack("<ii", 1, 1) + struct.pack("<ff", 0, 0)
    with pytest.raises(FlowFormatError, match="not a flow file"):
        read_flo(data)


def test_read_flo_truncated():
    data = hand_encoded_flo(2, 2, [(0, 0)] * 4)
    with pytest.raises(FlowFormatError, match="unexpected end"):
        read_flo(data[:-3])


def test_read_flo_non_finite_sample_located():
    data = hand_encoded_flo(2, 1, [(0.0, 0.0), (np.inf, 0.0)])
    with pytest.raises(FlowFormatError, match=r"invalid flow sample at \(1,0\)"):
        read_flo(data)


def test_read_flo_trailing_bytes():
    data = hand_encoded_flo(1, 1, [(0, 0)]) + b"\x00"
    with pytest.raises(FlowFormatError, match="trailing"):
        read_flo(data)


def test_write_flo_zero_flow_layout():
    out = write_flo(FlowField(u=np.zeros((1, 1)), v=np.zeros((1, 1))))
    assert len(out) == 20
    assert out[-8:] == b"\x00" * 8
    assert out[:4] == b"PIEH"


def test_write_flo_2x1_length():
    out = write_flo(FlowField(u=np.zeros((1, 2)), v=np.zeros((1, 2))))
    assert len(out) == 12 + 2 * 8


def test_flo_round_trips_are_exact():
    rng = np.random.default_rng(0)
    for _ in range(20):
        h, w = rng.integers(1, 9, size=2)
        flow = FlowField(u=rng.normal(0, 5, (h, w)).astype(np.float32),
                         v=rng.normal(0, 5, (h, w)).astype(np.float32))
        data = write_flo(flow)
        back = read_flo(data)
        assert np.array_equal(back.u, flow.u)
        assert np.array_equal(back.v, flow.v)
        assert write_flo(back) == data


def textured_frame(rng, h=24, w=24):
    return Frame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def test_estimate_flow_static_scene_is_zero():
    rng = np.random.default_rng(1)
    f = textured_frame(rng)
    flow = estimate_flow(f, f, BlockMatchParams(block_size=5, search_radius=3))
    assert np.all(flow.u == 0) and np.all(flow.v == 0)


def test_estimate_flow_recovers_known_shift():
    rng = np.random.default_rng(2)
    prev = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    cur = np.roll(prev, 2, axis=1)  # scene shifted right by 2
    flow = estimate_flow(Frame(prev), Frame(cur), BlockMatchParams(block_size=5, search_radius=3))
    interior = np.s_[5:-5, 5:-5]
    assert np.all(flow.u[interior] == -2)
    assert np.all(flow.v[interior] == 0)


def test_estimate_flow_constant_frames_tie_break_to_zero():
    f = Frame(np.full((10, 10, 3), 77, dtype=np.uint8))
    flow = estimate_flow(f, f, BlockMatchParams(block_size=3, search_radius=2))
    assert np.all(flow.u == 0) and np.all(flow.v == 0)


def test_estimate_flow_dimension_mismatch():
    a = Frame(np.zeros((8, 8, 3), dtype=np.uint8))
    b = Frame(np.zeros((8, 9, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="dimension mismatch"):
        estimate_flow(a, b)


def test_block_match_params_validation():
    with pytest.raises(ValueError):
        BlockMatchParams(block_size=4)
    with pytest.raises(ValueError):
        BlockMatchParams(search_radius=0)
    with pytest.raises(ValueError):
        BlockMatchParams(cost="mad")


def zero_flow(h, w):
    return FlowField(u=np.zeros((h, w)), v=np.zeros((h, w)))


def uniform_flow(h, w, u, v):
    return FlowField(u=np.full((h, w), u, dtype=np.float32),
                     v=np.full((h, w), v, dtype=np.float32))


def test_warp_scalar_zero_flow_identity():
    rng = np.random.default_rng(3)
    m = ScalarMap(rng.random((6, 7)))
    for mode in (WarpSampling.NEAREST, WarpSampling.BILINEAR):
        assert np.array_equal(warp_scalar_map(m, zero_flow(6, 7), mode).values, m.values)


def test_warp_scalar_single_source_pixel():
    vals = np.zeros((8, 8))
    vals[3, 3] = 1.0  # (x=3, y=3)
    out = warp_scalar_map(ScalarMap(vals), uniform_flow(8, 8, 1, 0), WarpSampling.NEAREST)
    assert out.values[3, 2] == 1.0  # out(2,3) = map(3,3)
    assert out.values.sum() == 1.0


def test_warp_scalar_out_of_bounds_gives_zero():
    m = ScalarMap(np.ones((5, 5)))
    out = warp_scalar_map(m, uniform_flow(5, 5, 100, 0), WarpSampling.NEAREST)
    assert np.all(out.values == 0)


def test_warp_constant_map_invariant_in_bounds():
    m = ScalarMap(np.full((9, 9), 0.6))
    flow = uniform_flow(9, 9, 0.3, -0.4)  # fractional, samples stay inside on interior
    out = warp_scalar_map(m, flow, WarpSampling.BILINEAR)
    assert np.allclose(out.values[1:-1, 1:-1], 0.6)


def test_warp_mask_identity_and_all_ones():
    rng = np.random.default_rng(4)
    m = BinaryMask((rng.random((6, 6)) < 0.5).astype(np.uint8))
    assert np.array_equal(warp_mask(m, zero_flow(6, 6)).labels, m.labels)
    ones = BinaryMask(np.ones((6, 6), dtype=np.uint8))
    inbounds = FlowField(u=np.where(np.arange(6)[None, :] < 3, 1, -1) * np.ones((6, 6)),
                         v=np.zeros((6, 6)))
    assert warp_mask(ones, inbounds).labels.all()


def test_warp_mask_single_pixel_moves_up():
    labels = np.zeros((8, 8), dtype=np.uint8)
    labels[4, 4] = 1
    out = warp_mask(BinaryMask(labels), uniform_flow(8, 8, 0, 1))
    assert out.labels[3, 4] == 1  # foreground appears one row above
    assert out.labels.sum() == 1


def test_warp_mask_agrees_with_scalar_path():
    rng = np.random.default_rng(5)
    for _ in range(10):
        labels = (rng.random((7, 9)) < 0.5).astype(np.uint8)
        flow = FlowField(u=rng.integers(-2, 3, (7, 9)).astype(np.float32),
                         v=rng.integers(-2, 3, (7, 9)).astype(np.float32))
        via_mask = warp_mask(BinaryMask(labels), flow)
        via_scalar = warp_scalar_map(ScalarMap(labels.astype(float)), flow, WarpSampling.NEAREST)
        assert np.array_equal(via_mask.labels, via_scalar.values > 0.5)


def test_integer_translation_is_exact():
    rng = np.random.default_rng(6)
    vals = rng.random((10, 10))
    out = warp_scalar_map(ScalarMap(vals), uniform_flow(10, 10, 2, 1), WarpSampling.NEAREST)
    # out(p) = in(p + (2,1)) wherever in bounds
    assert np.array_equal(out.values[:-1, :-2], vals[1:, 2:])


def test_estimate_flow_recovers_synthetic_ground_truth():
    ds = synth_sequence(SynthParams(frame_count=3))
    est = estimate_flow(ds.frames[0], ds.frames[1], BlockMatchParams(block_size=5, search_radius=3))
    gt = ds.flows[0]
    interior = np.zeros((64, 64), dtype=bool)
    interior[4:-4, 4:-4] = True
    agree = (est.u == gt.u) & (est.v == gt.v) & interior
    assert agree.sum() / interior.sum() >= 0.95
