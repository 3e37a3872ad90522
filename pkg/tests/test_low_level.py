import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidsal.errors import BinMismatch, EmptyRegion
from vidsal.low_level import (
    DEFAULT_LF_WEIGHTS,
    FEATURES,
    GaborBank,
    LowLevelHistograms,
    chi_square,
    gabor_energy,
    low_level_contributions,
    low_level_map,
    minmax,
    region_histograms,
    resample_circular,
    write_debug_csv,
)
from vidsal.optical_flow import FlowField
from vidsal.segmentation import Labeling, slic_segment

from conftest import lab_frame, random_rgb


def labeling_from(labels):
    labels = np.asarray(labels, dtype=np.int32)
    h, w = labels.shape
    r = int(labels.max()) + 1
    counts = np.bincount(labels.ravel(), minlength=r)
    ys, xs = np.mgrid[0:h, 0:w]
    cx = np.bincount(labels.ravel(), xs.ravel(), r) / counts
    cy = np.bincount(labels.ravel(), ys.ravel(), r) / counts
    return Labeling(labels, counts, np.column_stack([(cx + 0.5) / w, (cy + 0.5) / h]),
                    np.arange(r), np.zeros((r, 3)))


def brute_contrast(hists, centroids, sizes, weights, sigma):
    """Weighted contrast sum with explicit loops over regions and bins."""
    r = len(sizes)
    out = []
    for i in range(r):
        total = 0.0
        for j in range(r):
            if i == j:
                continue
            d2 = sum((centroids[i][k] - centroids[j][k]) ** 2 for k in range(2))
            omega = math.exp(-d2 / sigma**2)
            for f, name in enumerate(FEATURES):
                a, b = hists.feature(name)[i], hists.feature(name)[j]
                chi = 0.5 * sum((x - y) ** 2 / (x + y + 1e-10) for x, y in zip(a, b))
                total += weights[f] * sizes[j] * omega * chi
        out.append(total)
    return out


# chi-square


def test_chi_square_examples():
    assert chi_square([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert chi_square([1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-9)
    assert chi_square([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_chi_square_length_mismatch():
    with pytest.raises(BinMismatch):
        chi_square([1.0], [0.5, 0.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_chi_square_symmetric_nonnegative(a, b):
    a = np.asarray(a) + 1e-3
    b = np.asarray(b) + 1e-3
    a, b = a / a.sum(), b / b.sum()
    d = chi_square(a, b)
    assert d >= 0
    assert d == pytest.approx(chi_square(b, a), abs=1e-15)
    if np.allclose(a, b, atol=0, rtol=0):
        assert d == 0


# Gabor bank


def test_gabor_kernels_shape_and_symmetry():
    bank = GaborBank()
    assert bank.radius == math.ceil(3 * 0.56 * 8)
    for theta in bank.thetas:
        even, odd = bank.pair(theta)
        assert even.shape[0] % 2 == 1 and even.shape == odd.shape
        np.testing.assert_allclose(even, even[::-1, ::-1], atol=1e-15)
        np.testing.assert_allclose(odd, -odd[::-1, ::-1], atol=1e-15)
        assert abs(even.sum()) < 1e-9 and abs(odd.sum()) < 1e-9
    assert len(bank.kernels()) == 16


def test_constant_plane_has_no_energy():
    _, energy = gabor_energy(np.full((30, 30), 42.0))
    assert np.max(energy) < 1e-6


def test_vertical_grating_dominant_orientation():
    x = np.arange(64)
    plane = np.tile(50 + 30 * np.cos(2 * np.pi * x / 8.0), (64, 1))
    dominant, energy = gabor_energy(plane)
    inner = dominant[16:-16, 16:-16]
    # intensity varies along x: the carrier runs along x at theta = pi/2
    assert np.all(inner == 2)
    assert np.all(energy[16:-16, 16:-16] > 1.0)


def test_gabor_deterministic():
    plane = lab_frame(random_rgb((24, 24), 3)).l
    a, b = gabor_energy(plane), gabor_energy(plane.copy())
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


# histograms


def _uniform_frame(shape, rgb=(120, 60, 30)):
    return lab_frame(np.broadcast_to(np.asarray(rgb), shape + (3,)).copy())


def test_uniform_region_color_histogram_has_four_quarter_bins():
    frame = _uniform_frame((10, 12))
    lbl = labeling_from(np.zeros((10, 12), int))
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((10, 12)))
    nz = h.color[0][h.color[0] > 0]
    assert nz.size == 4 and np.allclose(nz, 0.25)
    assert h.flow_mag[0, 0] == 1.0 and h.flow_ori[0, 0] == 1.0
    for name in FEATURES:
        np.testing.assert_allclose(h.feature(name).sum(axis=1), 1.0, atol=1e-9)
    # textureless: no orientation preference
    np.testing.assert_allclose(h.orientation[0], 1 / 16)


def test_identical_content_identical_histograms():
    half = random_rgb((12, 8), 5)
    frame = lab_frame(np.concatenate([half, half], axis=1))
    labels = np.zeros((12, 16), int)
    labels[:, 8:] = 1
    flow = FlowField(np.tile(np.linspace(0, 1, 8), (12, 2)), np.zeros((12, 16)))
    # gabor output copied across halves so the test checks binning only
    dom, en = gabor_energy(frame.l)
    dom[:, 8:], en[:, 8:] = dom[:, :8], en[:, :8]
    h = region_histograms(labeling_from(labels), frame, (dom, en), flow)
    for name in FEATURES:
        np.testing.assert_array_equal(h.feature(name)[0], h.feature(name)[1])


def test_orientation_bins_eight_and_resampling():
    frame = lab_frame(random_rgb((20, 20), 1))
    lbl = labeling_from(np.zeros((20, 20), int))
    g = gabor_energy(frame.l)
    h8 = region_histograms(lbl, frame, g, FlowField.zeros((20, 20)), orientation_bins=8)
    h16 = region_histograms(lbl, frame, g, FlowField.zeros((20, 20)), orientation_bins=16)
    assert h8.orientation.shape == (1, 8) and h16.orientation.shape == (1, 16)
    np.testing.assert_allclose(h16.orientation, resample_circular(h8.orientation, 16) /
                               resample_circular(h8.orientation, 16).sum())


def test_resample_circular_preserves_mass_and_uniform():
    rng = np.random.default_rng(0)
    h = rng.random((3, 8))
    out = resample_circular(h, 16)
    np.testing.assert_allclose(out.sum(axis=1), 2 * h.sum(axis=1))
    np.testing.assert_allclose(resample_circular(np.ones((1, 8)), 16), 1.0)


def test_empty_region_rejected():
    labels = np.zeros((4, 4), np.int32)
    lbl = Labeling(labels, np.array([16, 0]), np.array([[0.5, 0.5], [0.5, 0.5]]),
                   np.arange(2), np.zeros((2, 3)))
    frame = _uniform_frame((4, 4))
    with pytest.raises(EmptyRegion):
        region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((4, 4)))


# contrast map


def test_two_equal_regions_zero():
    frame = _uniform_frame((8, 8))
    labels = np.zeros((8, 8), int)
    labels[:, 4:] = 1
    lbl = labeling_from(labels)
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((8, 8)))
    assert np.array_equal(low_level_map(h, lbl.centroid, lbl.sizes()), [0.0, 0.0])


@pytest.mark.parametrize("k", [1, 4, 9, 25])
def test_uniform_frame_all_zero(k):
    frame = _uniform_frame((30, 30), (90, 90, 90))
    lbl, _ = slic_segment(frame, k)
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((30, 30)))
    s = low_level_map(h, lbl.centroid, lbl.sizes())
    assert s.shape == (lbl.n_regions,) and np.all(s == 0.0)


def _red_among_grays():
    rgb = np.full((10, 30, 3), 128)
    rgb[:, 10:20] = (220, 20, 20)
    labels = np.repeat([[0] * 10 + [1] * 10 + [2] * 10], 10, axis=0)
    frame = lab_frame(rgb)
    lbl = labeling_from(labels)
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((10, 30)))
    return h, lbl


def test_red_region_most_salient_against_brute_force():
    h, lbl = _red_among_grays()
    raw = low_level_contributions(h, lbl.centroid, lbl.sizes()).sum(axis=1)
    ref = brute_contrast(h, lbl.centroid.tolist(), lbl.sizes().tolist(), DEFAULT_LF_WEIGHTS, 0.2)
    np.testing.assert_allclose(raw, ref, rtol=1e-12, atol=1e-15)
    assert raw[1] > raw[0] and raw[1] > raw[2]
    s = low_level_map(h, lbl.centroid, lbl.sizes())
    assert s[1] == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_contrast_matches_brute_force_on_random_frames(seed):
    frame = lab_frame(random_rgb((24, 30), seed))
    lbl, _ = slic_segment(frame, 8)
    rng = np.random.default_rng(seed)
    flow = FlowField(rng.standard_normal((24, 30)), rng.standard_normal((24, 30)))
    h = region_histograms(lbl, frame, gabor_energy(frame.l), flow)
    raw = low_level_contributions(h, lbl.centroid, lbl.sizes()).sum(axis=1)
    ref = brute_contrast(h, lbl.centroid.tolist(), lbl.sizes().tolist(), DEFAULT_LF_WEIGHTS, 0.2)
    np.testing.assert_allclose(raw, ref, rtol=1e-10)


def test_permutation_invariance():
    frame = lab_frame(random_rgb((20, 20), 7))
    lbl, _ = slic_segment(frame, 6)
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((20, 20)))
    s = low_level_map(h, lbl.centroid, lbl.sizes())
    perm = np.random.default_rng(1).permutation(lbl.n_regions)
    hp = LowLevelHistograms(*(h.feature(n)[perm] for n in FEATURES))
    sp = low_level_map(hp, lbl.centroid[perm], lbl.sizes()[perm])
    np.testing.assert_allclose(sp, s[perm], atol=1e-15)
    assert s.max() == 1.0 and s.min() == 0.0


def test_single_region_is_zero():
    frame = lab_frame(random_rgb((10, 10), 0))
    lbl = labeling_from(np.zeros((10, 10), int))
    h = region_histograms(lbl, frame, gabor_energy(frame.l), FlowField.zeros((10, 10)))
    assert low_level_map(h, lbl.centroid, lbl.sizes()).tolist() == [0.0]


def test_weights_must_sum_to_one():
    h, lbl = _red_among_grays()
    with pytest.raises(ValueError):
        low_level_map(h, lbl.centroid, lbl.sizes(), weights=(0.5, 0.5, 0.5, 0, 0))


def test_per_channel_color_mode():
    h, lbl = _red_among_grays()
    joint = low_level_contributions(h, lbl.centroid, lbl.sizes(), color_mode="joint")
    per = low_level_contributions(h, lbl.centroid, lbl.sizes(), color_mode="per-channel")
    # each channel's histogram has unit mass instead of a quarter
    np.testing.assert_allclose(per[:, 0], 4 * joint[:, 0], rtol=1e-9)
    np.testing.assert_array_equal(per[:, 1:], joint[:, 1:])


def test_minmax():
    assert minmax(np.array([2.0, 4.0, 3.0])).tolist() == [0.0, 1.0, 0.5]
    assert minmax(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]
    assert minmax(np.array([])).size == 0


def test_debug_csv(tmp_path):
    h, lbl = _red_among_grays()
    c = low_level_contributions(h, lbl.centroid, lbl.sizes())
    write_debug_csv(tmp_path / "d" / "x.csv", minmax(c.sum(axis=1)), c)
    rows = (tmp_path / "d" / "x.csv").read_text().splitlines()
    assert rows[0] == "region,s_lf," + ",".join(FEATURES)
    assert len(rows) == 4
