"""Saliency benchmark metrics: PR curves, F-measure (adaptive and max) and MAE.

Per-frame scores are averaged over the annotated frames of each video first,
then across videos. Saliency maps may be given as floats in [0, 1] or as 8-bit
rasters; a pixel is positive at threshold theta when ``255 * s >= theta``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import MapMismatch
from .frame_io import load_ground_truth, read_saliency

BETA2 = 0.3
N_THRESHOLDS = 256


def _as_scores(sm) -> np.ndarray:
    """Map to the 0..255 integer score s.t. (score >= theta) == (255 * sm >= theta)."""
    sm = np.asarray(sm)
    if sm.dtype == np.uint8:
        return sm.astype(np.int64)
    scaled = 255.0 * sm.astype(np.float64)
    # theta is an integer, so x >= theta exactly when floor(x) >= theta
    return np.clip(np.floor(scaled), 0, 255).astype(np.int64)


def _as_unit(sm) -> np.ndarray:
    sm = np.asarray(sm)
    if sm.dtype == np.uint8:
        return sm.astype(np.float64) / 255.0
    return sm.astype(np.float64)


def _check(a, b):
    if np.shape(a) != np.shape(b):
        raise MapMismatch(f"shape {np.shape(a)} does not match {np.shape(b)}")


def precision_recall(bm, gt) -> tuple[float, float]:
    """Precision and recall of a binary map.

    An empty prediction has precision 1 only when the ground truth is empty too.
    Recall against an empty ground truth is 1 (such frames are skipped when
    aggregating).
    """
    _check(bm, gt)
    bm = np.asarray(bm, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    inter = int(np.count_nonzero(bm & gt))
    n_bm = int(np.count_nonzero(bm))
    n_gt = int(np.count_nonzero(gt))
    p = inter / n_bm if n_bm else (1.0 if n_gt == 0 else 0.0)
    r = inter / n_gt if n_gt else 1.0
    return p, r


def f_measure(p, r, beta2: float = BETA2):
    """(1 + b2) p r / (b2 p + r), zero where the denominator vanishes. Works elementwise."""
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    den = beta2 * p + r
    out = np.divide((1.0 + beta2) * p * r, den, out=np.zeros(np.broadcast(p, r).shape), where=den > 0)
    return float(out) if out.ndim == 0 else out


def frame_counts(sm, gt) -> tuple[np.ndarray, np.ndarray, int]:
    """True positives and predicted positives for every threshold, plus |GT|."""
    _check(sm, gt)
    scores = _as_scores(sm).ravel()
    g = np.asarray(gt, dtype=bool).ravel()
    hist_all = np.bincount(scores, minlength=N_THRESHOLDS)
    hist_tp = np.bincount(scores[g], minlength=N_THRESHOLDS)
    # count of scores >= theta, for theta = 0..255
    n_bm = np.cumsum(hist_all[::-1])[::-1]
    tp = np.cumsum(hist_tp[::-1])[::-1]
    return tp, n_bm, int(np.count_nonzero(g))


def frame_pr_curve(sm, gt) -> tuple[np.ndarray, np.ndarray]:
    tp, n_bm, n_gt = frame_counts(sm, gt)
    tp = tp.astype(np.float64)
    p = np.divide(tp, n_bm, out=np.full(N_THRESHOLDS, 1.0 if n_gt == 0 else 0.0), where=n_bm > 0)
    r = tp / n_gt if n_gt else np.ones(N_THRESHOLDS)
    return p, r


def adaptive_threshold(sm) -> float:
    """mean + std of the map, capped at its maximum so at least one pixel is positive."""
    s = _as_unit(sm)
    return min(float(s.mean() + s.std()), float(s.max()))


def frame_f_adap(sm, gt, beta2: float = BETA2) -> float:
    s = _as_unit(sm)
    p, r = precision_recall(s >= adaptive_threshold(s), gt)
    return f_measure(p, r, beta2)


def frame_mae(sm, gt) -> float:
    _check(sm, gt)
    return float(np.mean(np.abs(_as_unit(sm) - np.asarray(gt, dtype=np.float64))))


Pairs = Sequence[tuple[np.ndarray, np.ndarray]]


def _mean(values: list) -> float | np.ndarray:
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total / len(values)


def _annotated(pairs: Pairs) -> list:
    return [(sm, gt) for sm, gt in pairs if np.any(gt)]


def pr_curve(videos: Mapping[str, Pairs]) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall at theta = 0..255, averaged per video then across videos."""
    per_video = []
    for name in videos:
        frames = _annotated(videos[name])
        if not frames:
            continue
        curves = [frame_pr_curve(sm, gt) for sm, gt in frames]
        per_video.append((_mean([c[0] for c in curves]), _mean([c[1] for c in curves])))
    if not per_video:
        return np.zeros(N_THRESHOLDS), np.zeros(N_THRESHOLDS)
    return _mean([v[0] for v in per_video]), _mean([v[1] for v in per_video])


def f_max(curve: tuple[np.ndarray, np.ndarray], beta2: float = BETA2) -> float:
    """Largest F over the thresholds of an aggregated PR curve."""
    p, r = curve
    return float(np.max(f_measure(p, r, beta2)))


def f_adap(videos: Mapping[str, Pairs], beta2: float = BETA2) -> float:
    per_video = []
    for name in videos:
        frames = _annotated(videos[name])
        if frames:
            per_video.append(_mean([frame_f_adap(sm, gt, beta2) for sm, gt in frames]))
    return float(_mean(per_video)) if per_video else 0.0


def mae(videos: Mapping[str, Pairs]) -> float:
    """MAE over every frame that has ground truth, including empty masks."""
    per_video = []
    for name in videos:
        frames = list(videos[name])
        if frames:
            per_video.append(_mean([frame_mae(sm, gt) for sm, gt in frames]))
    return float(_mean(per_video)) if per_video else 0.0


@dataclass
class EvalReport:
    precision: np.ndarray
    recall: np.ndarray
    f_adap: float
    f_max: float
    mae: float
    per_video: dict = field(default_factory=dict)

    @property
    def f_curve(self) -> np.ndarray:
        return f_measure(self.precision, self.recall)

    def summary(self) -> dict:
        return {"f_adap": self.f_adap, "f_max": self.f_max, "mae": self.mae,
                "per_video": self.per_video}


def evaluate(videos: Mapping[str, Pairs], beta2: float = BETA2) -> EvalReport:
    curve = pr_curve(videos)
    per_video = {}
    for name in videos:
        one = {name: videos[name]}
        per_video[name] = {
            "f_adap": f_adap(one, beta2),
            "f_max": f_max(pr_curve(one), beta2),
            "mae": mae(one),
            "frames": len(videos[name]),
            "annotated": len(_annotated(videos[name])),
        }
    return EvalReport(curve[0], curve[1], f_adap(videos, beta2), f_max(curve, beta2),
                      mae(videos), per_video)


def collect_pairs(maps_root, dataset_root) -> dict[str, list]:
    """Pair ``<maps_root>/<video>/<stem>.png`` with ``<dataset_root>/<video>/gt/<stem>.png``."""
    maps_root = Path(maps_root)
    dataset_root = Path(dataset_root)
    videos: dict[str, list] = {}
    for vdir in sorted(p for p in dataset_root.iterdir() if (p / "gt").is_dir()):
        mdir = maps_root / vdir.name
        if not mdir.is_dir():
            continue
        stems = sorted(p.stem for p in mdir.glob("*.png"))
        gts = load_ground_truth(vdir / "gt", stems)
        videos[vdir.name] = [(read_saliency(mdir / f"{s}.png"), gts[s]) for s in stems if s in gts]
    return videos


def write_csv(report: EvalReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    f = report.f_curve
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["threshold", "precision", "recall", "f"])
        for t in range(N_THRESHOLDS):
            wr.writerow([t, f"{report.precision[t]:.6f}", f"{report.recall[t]:.6f}", f"{f[t]:.6f}"])
        wr.writerow(["summary", f"f_adap={report.f_adap:.6f}", f"f_max={report.f_max:.6f}",
                     f"mae={report.mae:.6f}"])


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    p, r = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["threshold"] == "summary":
                continue
            p.append(float(row["precision"]))
            r.append(float(row["recall"]))
    return np.array(p), np.array(r)


def write_summary(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def write_pr_svg(curves: Mapping[str, tuple[np.ndarray, np.ndarray]], path, size: int = 400) -> None:
    """Recall on x, precision on y, one polyline per labeled curve."""
    m = 50
    span = size - 2 * m

    def xy(r, p):
        return m + r * span, size - m - p * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{m}" y="{m}" width="{span}" height="{span}" fill="none" stroke="black"/>',
    ]
    for k in range(6):
        v = k / 5
        x, _ = xy(v, 0)
        _, y = xy(0, v)
        parts.append(f'<text x="{x:.1f}" y="{size - m + 16}" font-size="10" text-anchor="middle">{v:.1f}</text>')
        parts.append(f'<text x="{m - 6}" y="{y + 3:.1f}" font-size="10" text-anchor="end">{v:.1f}</text>')
    parts.append(f'<text x="{size / 2}" y="{size - 12}" font-size="12" text-anchor="middle">Recall</text>')
    parts.append(f'<text x="14" y="{size / 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {size / 2})">Precision</text>')
    for i, (label, (p, r)) in enumerate(curves.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (xy(rr, pp) for pp, rr in zip(p, r)))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{m + 8}" y="{m + 16 + 14 * i}" font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
