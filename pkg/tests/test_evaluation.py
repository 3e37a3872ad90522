import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from vidsal.errors import MapMismatch
from vidsal.evaluation import (
    adaptive_threshold,
    collect_pairs,
    evaluate,
    f_adap,
    f_max,
    f_measure,
    frame_counts,
    mae,
    pr_curve,
    precision_recall,
    read_curve_csv,
    write_csv,
    write_pr_svg,
    write_summary,
)

from oracles import brute_counts, brute_metrics


def random_videos(seed, n_videos=3, frames=(2, 5), shape=(8, 8), as_bytes=False, empty_gt=True):
    rng = np.random.default_rng(seed)
    videos = {}
    for v in range(n_videos):
        pairs = []
        for _ in range(rng.integers(*frames)):
            sm = rng.integers(0, 256, shape, dtype=np.uint8) if as_bytes else rng.random(shape)
            gt = rng.random(shape) < rng.uniform(0.1, 0.6)
            if empty_gt and rng.random() < 0.15:
                gt[:] = False
            pairs.append((sm, gt))
        videos[f"v{v}"] = pairs
    return videos


# per-frame primitives


def test_precision_recall_examples():
    gt = np.zeros((10, 20), bool)
    gt[:5] = True
    assert precision_recall(gt, gt) == (1.0, 1.0)
    assert precision_recall(~gt, gt) == (0.0, 0.0)
    gt = np.zeros(200, bool)
    gt[:100] = True
    bm = np.zeros(200, bool)
    bm[60:110] = True
    p, r = precision_recall(bm, gt)
    assert p == pytest.approx(0.8) and r == pytest.approx(0.4)


def test_precision_recall_empty_conventions():
    z = np.zeros((3, 3), bool)
    o = np.ones((3, 3), bool)
    assert precision_recall(z, z) == (1.0, 1.0)
    assert precision_recall(z, o) == (0.0, 0.0)
    assert precision_recall(o, z) == (0.0, 1.0)
    with pytest.raises(MapMismatch):
        precision_recall(z, np.zeros((3, 4), bool))


def test_f_measure_examples():
    assert f_measure(1.0, 1.0) == 1.0
    assert f_measure(1.0, 0.0) == 0.0
    assert f_measure(0.0, 0.0) == 0.0
    assert f_measure(0.8, 0.4) == pytest.approx(0.65, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
def test_f_measure_monotone(p, r, d):
    f = f_measure(p, r)
    assert 0 <= f <= 1
    assert f_measure(min(1, p + d), r) >= f - 1e-12
    assert f_measure(p, min(1, r + d)) >= f - 1e-12


def test_threshold_counts_match_brute_force():
    rng = np.random.default_rng(4)
    sm = rng.random((8, 8))
    sm[0, :4] = [0.0, 1.0, 3 / 255, 128 / 255]
    gt = rng.random((8, 8)) < 0.4
    tp, n_bm, n_gt = frame_counts(sm, gt)
    for theta in range(256):
        assert (tp[theta], n_bm[theta], n_gt) == brute_counts(sm.tolist(), gt.tolist(), theta)


def test_byte_maps_use_raw_values():
    sm = np.array([[0, 1, 254, 255]], dtype=np.uint8)
    gt = np.array([[False, True, True, True]])
    tp, n_bm, _ = frame_counts(sm, gt)
    assert n_bm[0] == 4 and n_bm[1] == 3 and n_bm[255] == 1 and tp[2] == 2


def test_adaptive_threshold_constant_map():
    sm = np.full((4, 4), 0.5)
    assert adaptive_threshold(sm) == 0.5
    gt = np.zeros((4, 4), bool)
    gt[:2] = True
    videos = {"a": [(sm, gt)]}
    # everything is positive: p = 0.5, r = 1
    assert f_adap(videos) == pytest.approx(f_measure(0.5, 1.0))


# aggregate metrics


def test_perfect_prediction():
    rng = np.random.default_rng(0)
    videos = {f"v{i}": [(g.astype(float), g) for g in (rng.random((5, 7)) < 0.3 for _ in range(3))]
              for i in range(2)}
    rep = evaluate(videos)
    assert rep.f_adap == 1.0 and rep.f_max == 1.0 and rep.mae == 0.0
    assert np.all(rep.precision[1:] == 1.0) and np.all(rep.recall[1:] == 1.0)


def test_inverted_prediction_mae_one():
    g = np.zeros((4, 4), bool)
    g[1:3] = True
    assert mae({"a": [((~g).astype(float), g)]}) == 1.0
    assert mae({"a": [(np.full((4, 4), 0.3), np.zeros((4, 4), bool))]}) == pytest.approx(0.3)


def test_all_positive_map_curve():
    g = np.zeros((10, 10), bool)
    g[:3] = True
    p, r = pr_curve({"a": [(np.ones((10, 10)), g)]})
    np.testing.assert_allclose(p, 0.3)
    np.testing.assert_allclose(r, 1.0)


def test_recall_at_threshold_zero():
    videos = random_videos(1)
    _, r = pr_curve(videos)
    assert r[0] == 1.0


def test_empty_gt_frames_skipped_for_pr_but_kept_for_mae():
    g = np.zeros((4, 4), bool)
    g[0] = True
    sm = np.full((4, 4), 0.25)
    with_empty = {"a": [(sm, g), (sm, np.zeros((4, 4), bool))]}
    only = {"a": [(sm, g)]}
    np.testing.assert_array_equal(pr_curve(with_empty)[0], pr_curve(only)[0])
    assert f_adap(with_empty) == f_adap(only)
    assert mae(with_empty) == pytest.approx((0.25 * 12 / 16 + 0.75 * 4 / 16 + 0.25) / 2)


def test_per_video_then_dataset_averaging():
    g = np.zeros((2, 2), bool)
    g[0, 0] = True
    good = (g.astype(float), g)
    bad = ((~g).astype(float), g)
    videos = {"a": [good, good, good], "b": [bad]}
    assert mae(videos) == 0.5


def test_f_max_hand_picked():
    p = np.linspace(0, 1, 256)
    r = 1 - p
    f = [(1.3 * a * b / (0.3 * a + b)) if 0.3 * a + b > 0 else 0.0 for a, b in zip(p, r)]
    assert f_max((p, r)) == pytest.approx(max(f), abs=1e-15)


@pytest.mark.parametrize("as_bytes", [False, True])
@pytest.mark.parametrize("seed", range(4))
def test_metrics_match_brute_force(seed, as_bytes):
    videos = random_videos(seed, as_bytes=as_bytes)
    rep = evaluate(videos)
    lists = {k: [(sm.tolist(), gt.tolist()) for sm, gt in v] for k, v in videos.items()}
    prec, rec, fa, fm, m = brute_metrics(lists, as_bytes=as_bytes)
    np.testing.assert_allclose(rep.precision, prec, rtol=0, atol=1e-12)
    np.testing.assert_allclose(rep.recall, rec, rtol=0, atol=1e-12)
    assert rep.f_adap == pytest.approx(fa, abs=1e-12)
    assert rep.f_max == pytest.approx(fm, abs=1e-12)
    assert rep.mae == pytest.approx(m, abs=1e-12)


def test_metric_ranges():
    rep = evaluate(random_videos(9))
    for arr in (rep.precision, rep.recall, rep.f_curve):
        assert arr.min() >= 0 and arr.max() <= 1
    assert 0 <= rep.f_adap <= 1 and 0 <= rep.f_max <= 1 and 0 <= rep.mae <= 1
    assert set(rep.per_video) == {"v0", "v1", "v2"}


def test_binary_mae_symmetric():
    rng = np.random.default_rng(3)
    a, b = rng.random((6, 6)) < 0.5, rng.random((6, 6)) < 0.5
    assert mae({"x": [(a.astype(float), b)]}) == mae({"x": [(b.astype(float), a)]})


# reports


def test_csv_summary_and_svg(tmp_path):
    rep = evaluate(random_videos(2))
    write_csv(rep, tmp_path / "out" / "pr.csv")
    rows = (tmp_path / "out" / "pr.csv").read_text().splitlines()
    assert rows[0] == "threshold,precision,recall,f"
    assert len(rows) == 258 and rows[-1].startswith("summary,")
    p, r = read_curve_csv(tmp_path / "out" / "pr.csv")
    np.testing.assert_allclose(p, rep.precision, atol=5e-7)
    np.testing.assert_allclose(r, rep.recall, atol=5e-7)
    write_summary(rep, tmp_path / "s.json")
    data = json.loads((tmp_path / "s.json").read_text())
    assert data["f_max"] == rep.f_max
    write_pr_svg({"ours": (p, r), "other": (p * 0.9, r)}, tmp_path / "pr.svg")
    svg = (tmp_path / "pr.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2 and "ours" in svg


def test_collect_pairs(tmp_path):
    data = tmp_path / "data" / "vid" / "gt"
    data.mkdir(parents=True)
    maps = tmp_path / "maps" / "vid"
    maps.mkdir(parents=True)
    gt = np.zeros((4, 5), np.uint8)
    gt[1:3, 1:4] = 255
    Image.fromarray(gt).save(data / "00000.png")
    Image.fromarray(gt).save(maps / "00000.png")
    Image.fromarray(gt).save(maps / "00001.png")  # no ground truth: ignored
    videos = collect_pairs(tmp_path / "maps", tmp_path / "data")
    assert list(videos) == ["vid"] and len(videos["vid"]) == 1
    rep = evaluate(videos)
    assert rep.f_max == 1.0 and rep.mae == 0.0
