import numpy as np
import pytest

from vidsal.optical_flow import (
    FlowField,
    FlowParams,
    build_pyramid,
    estimate_flow,
    flow_magnitude,
    flow_orientation,
    read_flow,
    resize_bilinear,
    write_flow,
)

from conftest import textured_plane


def shifted_pair(dx, dy, seed=0, size=64, pad=16):
    """Two views of a larger texture, the second displaced by (dx, dy)."""
    big = textured_plane((size + 2 * pad, size + 2 * pad), seed)
    a = big[pad : pad + size, pad : pad + size]
    b = big[pad - dy : pad - dy + size, pad - dx : pad - dx + size]
    return a, b


def mean_epe(flow, dx, dy):
    return float(np.mean(np.hypot(flow.u - dx, flow.v - dy)))


@pytest.mark.parametrize("shift", [(2, 0), (1, 3), (0, -2), (-3, 1)])
def test_translation_recovered(shift):
    a, b = shifted_pair(*shift)
    assert mean_epe(estimate_flow(a, b), *shift) < 0.5


def test_periodic_translation():
    a = textured_plane((64, 64), seed=5)
    b = np.roll(a, (3, 1), axis=(0, 1))
    assert mean_epe(estimate_flow(a, b), 1, 3) < 0.5


def test_identical_frames_give_zero_flow():
    a = textured_plane((40, 48), seed=2)
    f = estimate_flow(a, a)
    assert np.max(np.abs(f.u)) < 1e-9 and np.max(np.abs(f.v)) < 1e-9


def test_constant_frames_are_finite():
    f = estimate_flow(np.full((20, 20), 30.0), np.full((20, 20), 60.0))
    assert np.all(np.isfinite(f.u)) and np.all(np.isfinite(f.v))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        estimate_flow(np.zeros((8, 8)), np.zeros((8, 9)))


def test_params_validation():
    with pytest.raises(ValueError):
        FlowParams(pyramid_levels=0)
    with pytest.raises(ValueError):
        FlowParams(scale_factor=1.0)


def test_pyramid_sizes_stop_at_minimum_side():
    pyr = build_pyramid(np.zeros((64, 48)), 3, 0.5)
    assert [p.shape for p in pyr] == [(64, 48), (32, 24), (16, 12)]
    assert len(build_pyramid(np.zeros((20, 20)), 5, 0.5)) == 2


def test_resize_identity_and_constant():
    plane = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(resize_bilinear(plane, (3, 4)), plane)
    assert np.allclose(resize_bilinear(np.full((5, 5), 2.5), (9, 7)), 2.5)


def test_magnitude_and_orientation():
    f = FlowField(u=np.array([[1.0, 0.0, -1.0, 0.0]]), v=np.array([[0.0, 1.0, 0.0, 0.0]]))
    assert np.allclose(flow_magnitude(f), [[1, 1, 1, 0]])
    assert np.allclose(flow_orientation(f), [[0, np.pi / 2, np.pi, 0]])


def test_flow_file_round_trip(tmp_path, rng):
    f = FlowField(u=rng.standard_normal((5, 7)), v=rng.standard_normal((5, 7)))
    write_flow(f, tmp_path / "a.flo")
    g = read_flow(tmp_path / "a.flo")
    np.testing.assert_allclose(g.u, f.u.astype(np.float32))
    np.testing.assert_allclose(g.v, f.v.astype(np.float32))
    with open(tmp_path / "a.flo", "rb") as fh:
        assert fh.read(4) == b"FLO1"


def test_flow_is_deterministic():
    a, b = shifted_pair(1, 2, seed=3)
    f1, f2 = estimate_flow(a, b), estimate_flow(a, b)
    assert np.array_equal(f1.u, f2.u) and np.array_equal(f1.v, f2.v)
