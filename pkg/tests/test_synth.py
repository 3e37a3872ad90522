import numpy as np
import pytest

from vidsal.frame_io import load_frame_sequence, load_ground_truth
from vidsal.synth import KINDS, generate, moving_square, write_dataset


def test_moving_square_geometry():
    frames, masks = moving_square(8, 160, 120, seed=0)
    assert len(frames) == 8 and frames[0].shape == (120, 160, 3) and frames[0].dtype == np.uint8
    side = 32
    for t, m in enumerate(masks):
        ys, xs = np.nonzero(m)
        assert m.sum() == side * side
        assert xs.min() == 8 + 2 * t and ys.min() == (120 - side) // 2
    # the object is clearly separable by color
    inside = frames[0][masks[0]].mean(axis=0)
    outside = frames[0][~masks[0]].mean(axis=0)
    assert inside[0] - outside[0] > 100


def test_bounce_keeps_object_inside():
    _, masks = moving_square(60, 40, 30, seed=1)
    for m in masks:
        assert m.sum() == 8 * 8


@pytest.mark.parametrize("kind", KINDS)
def test_kinds_are_deterministic(kind):
    a = generate(kind, 4, 64, 48, seed=3)
    b = generate(kind, 4, 64, 48, seed=3)
    for x, y in zip(a[0], b[0]):
        assert np.array_equal(x, y)
    assert all(m.any() for m in a[1])


def test_generate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate("spiral", 4, 32, 32)
    with pytest.raises(ValueError):
        generate("moving_square", 0, 32, 32)


def test_write_dataset_layout(tmp_path):
    vdir = write_dataset(tmp_path, "moving_square", n_frames=3, width=40, height=30, name="clip")
    assert vdir == tmp_path / "clip"
    frames = load_frame_sequence(vdir / "frames")
    assert [f.stem for f in frames] == ["00000", "00001", "00002"]
    gts = load_ground_truth(vdir / "gt", [f.stem for f in frames])
    _, masks = moving_square(3, 40, 30)
    for f, m in zip(frames, masks):
        assert np.array_equal(gts[f.stem], m)


def test_single_frame_and_two_components():
    frames, masks = generate("moving_square", 1, 40, 30)
    assert len(frames) == 1
    from scipy import ndimage

    _, masks = generate("two_objects", 5, 80, 60)
    for m in masks:
        assert ndimage.label(m)[1] == 2
