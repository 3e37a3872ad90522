"""Multiscale temporal superpixels: SLIC per frame, seeded by flow-propagated centroids.

Each scale is an independent chain over the frames. Frame 0 is grid seeded;
every later frame starts from the previous frame's centroids displaced by
the mean flow of their regions, which is what links regions into tracks.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .errors import InvalidK
from .frame_io import LabFrame
from .optical_flow import FlowField

log = logging.getLogger(__name__)


@dataclass
class Labeling:
    labels: np.ndarray  # H x W int32, dense ids 0..R-1
    pixel_count: np.ndarray  # R
    centroid: np.ndarray  # R x 2, (x, y) normalized to [0, 1]
    track_id: np.ndarray  # R
    mean_lab: np.ndarray  # R x 3
    centers: np.ndarray | None = None  # R x 5 final SLIC centers (L, a, b, x_px, y_px)

    @property
    def n_regions(self) -> int:
        return int(self.pixel_count.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def centroid_px(self) -> np.ndarray:
        h, w = self.labels.shape
        return np.column_stack([self.centroid[:, 0] * w - 0.5, self.centroid[:, 1] * h - 0.5])

    def sizes(self) -> np.ndarray:
        """Region sizes as a fraction of the frame."""
        return self.pixel_count / self.labels.size


@dataclass
class MultiscaleLabeling:
    scales: list[list[Labeling]]  # scales[l][t]
    scale_targets: tuple[int, ...]

    @property
    def n_scales(self) -> int:
        return len(self.scales)


@dataclass
class RegionGraph:
    n_nodes: int
    edges: np.ndarray  # E x 2, i < j
    weights: np.ndarray  # E
    boundary: np.ndarray  # bool per node: touches the outer 1-px ring


@dataclass
class Seeds:
    points: np.ndarray  # N x 2 pixel coordinates (x, y)
    track_ids: np.ndarray  # N, -1 for a fresh seed
    colors: np.ndarray | None = None  # N x 3 Lab, optional
    n_collisions: int = field(default=0)


def default_scale_targets(n_pixels: int) -> tuple[int, int, int]:
    return (math.ceil(n_pixels / 300), math.ceil(n_pixels / 600), math.ceil(n_pixels / 1200))


def grid_seeds(shape: tuple[int, int], k: int) -> np.ndarray:
    """Regular grid of about ``k`` seed points (pixel coordinates), row-major."""
    h, w = shape
    nx = max(1, int(round(math.sqrt(k * w / h))))
    ny = max(1, int(round(k / nx)))
    nx = min(nx, w)
    ny = min(ny, h)
    xs = (np.arange(nx) + 0.5) * (w / nx) - 0.5
    ys = (np.arange(ny) + 0.5) * (h / ny) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def region_stats(labels: np.ndarray, lab: np.ndarray):
    """Pixel counts, normalized centroids and mean Lab per label."""
    h, w = labels.shape
    r = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=r).astype(np.int64)
    ys, xs = np.mgrid[0:h, 0:w]
    cx = np.bincount(flat, weights=xs.ravel().astype(np.float64), minlength=r) / counts
    cy = np.bincount(flat, weights=ys.ravel().astype(np.float64), minlength=r) / counts
    centroid = np.column_stack([(cx + 0.5) / w, (cy + 0.5) / h])
    mean_lab = np.column_stack(
        [np.bincount(flat, weights=lab[..., c].ravel(), minlength=r) / counts for c in range(3)]
    )
    return counts, centroid, mean_lab


def slic_segment(
    frame: LabFrame,
    k: int,
    compactness: float = 10.0,
    seeds: Seeds | np.ndarray | None = None,
    n_iter: int = 10,
    max_iter: int = 150,
) -> tuple[Labeling, np.ndarray]:
    """SLIC superpixels in (L, a, b, x, y).

    Returns the labeling (track ids left at -1) and, per region, the index of
    the seed it grew from (-1 for a region born in the connectivity pass).
    """
    h, w = frame.shape
    if k < 1 or k > h * w:
        raise InvalidK(f"K must lie in [1, {h * w}], got {k}")
    if compactness <= 0:
        raise ValueError("compactness must be positive")
    lab = frame.lab_stack()

    colors = None
    if seeds is None:
        pts = grid_seeds((h, w), k)
    elif isinstance(seeds, Seeds):
        pts = np.asarray(seeds.points, dtype=np.float64)
        colors = seeds.colors
    else:
        pts = np.asarray(seeds, dtype=np.float64)
    xi = np.clip(np.rint(pts[:, 0]).astype(int), 0, w - 1)
    yi = np.clip(np.rint(pts[:, 1]).astype(int), 0, h - 1)
    if colors is None:
        colors = lab[yi, xi]
    else:
        colors = np.where(np.isnan(colors).any(axis=1, keepdims=True), lab[yi, xi], colors)
    centers = np.column_stack([colors, pts])

    step = math.sqrt(h * w / k)
    raw, final = kernels.slic_iterate(lab, centers, step, compactness, n_iter, max_iter)
    labels, origin = kernels.enforce_connectivity(raw)
    origin = np.where(origin < centers.shape[0], origin, -1)
    counts, centroid, mean_lab = region_stats(labels, lab)
    # regions born in the connectivity pass fall back to their own statistics
    region_centers = np.column_stack([mean_lab, centroid[:, 0] * w - 0.5, centroid[:, 1] * h - 0.5])
    region_centers[origin >= 0] = final[origin[origin >= 0]]
    labeling = Labeling(
        labels=labels,
        pixel_count=counts,
        centroid=centroid,
        track_id=np.full(counts.size, -1, dtype=np.int64),
        mean_lab=mean_lab,
        centers=region_centers,
    )
    return labeling, origin


def _clamp_interior(pts, w, h):
    out = pts.copy()
    out[:, 0] = np.clip(out[:, 0], min(1.0, w - 1), max(w - 2.0, 0.0))
    out[:, 1] = np.clip(out[:, 1], min(1.0, h - 1), max(h - 2.0, 0.0))
    return out


def propagate_seeds(prev: Labeling, flow: FlowField) -> Seeds:
    """Move each region's cluster center by the region's mean flow.

    Points are clamped to a 1-px interior margin. When two displaced
    centroids land within 1 px of each other the larger region keeps its
    seed and the smaller one is replaced by a fresh grid seed.
    """
    h, w = prev.shape
    if flow.shape != (h, w):
        raise ValueError("flow dimensions do not match labeling")
    r = prev.n_regions
    flat = prev.labels.ravel()
    counts = prev.pixel_count.astype(np.float64)
    mu = np.bincount(flat, weights=flow.u.ravel(), minlength=r) / counts
    mv = np.bincount(flat, weights=flow.v.ravel(), minlength=r) / counts
    if prev.centers is not None:
        base, colors = prev.centers[:, 3:5], prev.centers[:, :3].copy()
    else:
        base, colors = prev.centroid_px, prev.mean_lab.copy()
    shift = np.column_stack([mu, mv])
    pts = _clamp_interior(base + shift, w, h)
    # collisions are judged on region centroids; the cluster centers they
    # seed can sit arbitrarily close after the connectivity pass
    probe = _clamp_interior(prev.centroid_px + shift, w, h)
    tracks = prev.track_id.astype(np.int64).copy()

    # larger regions claim their spot first; ties by region id
    order = sorted(range(r), key=lambda i: (-prev.pixel_count[i], i))
    kept: list[int] = []
    losers: list[int] = []
    for i in order:
        if kept:
            d = np.hypot(*(probe[kept] - probe[i]).T)
            if np.any(d <= 1.0):
                losers.append(i)
                continue
        kept.append(i)

    if losers:
        grid = grid_seeds((h, w), r)
        taken = pts[kept]
        for i in losers:
            d = np.min(np.hypot(grid[:, None, 0] - taken[None, :, 0], grid[:, None, 1] - taken[None, :, 1]), axis=1)
            g = int(np.argmax(d))
            pts[i] = grid[g]
            tracks[i] = -1
            colors[i] = np.nan
            taken = np.vstack([taken, grid[g]])
    return Seeds(points=pts, track_ids=tracks, colors=colors, n_collisions=len(losers))


class _TrackCounter:
    def __init__(self):
        self.next = 0

    def fresh(self, n: int) -> np.ndarray:
        out = np.arange(self.next, self.next + n, dtype=np.int64)
        self.next += n
        return out


def segment_scale_chain(frames, flows, k, compactness=10.0, n_iter=10, drift=0.2, max_iter=150):
    """Yield one Labeling per frame for a single scale."""
    counter = _TrackCounter()
    prev = None
    for t, frame in enumerate(frames):
        if prev is None:
            lbl, _ = slic_segment(frame, k, compactness, None, n_iter, max_iter)
            lbl.track_id = counter.fresh(lbl.n_regions)
        else:
            seeds = propagate_seeds(prev, flows[t - 1])
            lbl, origin = slic_segment(frame, k, compactness, seeds, n_iter, max_iter)
            if abs(lbl.n_regions - k) > drift * k:
                log.info("frame %d: %d regions vs target %d, reseeding from grid", t, lbl.n_regions, k)
                lbl, _ = slic_segment(frame, k, compactness, None, n_iter, max_iter)
                lbl.track_id = counter.fresh(lbl.n_regions)
            else:
                tracks = np.where(origin >= 0, seeds.track_ids[np.maximum(origin, 0)], -1)
                missing = tracks < 0
                tracks[missing] = counter.fresh(int(missing.sum()))
                lbl.track_id = tracks
        prev = lbl
        yield lbl


def segment_video(frames, flows, scale_targets=None, compactness=10.0, n_iter=10,
                  max_iter=150, drift=0.2) -> MultiscaleLabeling:
    if len(flows) != max(0, len(frames) - 1):
        raise ValueError("need exactly len(frames) - 1 flow fields")
    if scale_targets is None:
        h, w = frames[0].shape
        scale_targets = default_scale_targets(h * w)
    scales = [
        list(segment_scale_chain(frames, flows, k, compactness, n_iter, drift, max_iter))
        for k in scale_targets
    ]
    return MultiscaleLabeling(scales=scales, scale_targets=tuple(scale_targets))


def adjacency(labeling: Labeling, frame: LabFrame) -> RegionGraph:
    """Rook-adjacency region graph weighted by mean-Lab Euclidean distance."""
    labels = labeling.labels
    r = labeling.n_regions
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        d = a != b
        lo = np.minimum(a[d], b[d]).astype(np.int64)
        hi = np.maximum(a[d], b[d]).astype(np.int64)
        pairs.append(lo * r + hi)
    keys = np.unique(np.concatenate(pairs)) if pairs else np.empty(0, dtype=np.int64)
    edges = np.column_stack([keys // r, keys % r]).astype(np.int64)

    lab = frame.lab_stack()
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=r).astype(np.float64)
    mean = np.column_stack(
        [np.bincount(flat, weights=lab[..., c].ravel(), minlength=r) / counts for c in range(3)]
    )
    weights = np.linalg.norm(mean[edges[:, 0]] - mean[edges[:, 1]], axis=1) if len(edges) else np.empty(0)

    ring = np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    boundary = np.zeros(r, dtype=bool)
    boundary[np.unique(ring)] = True
    return RegionGraph(n_nodes=r, edges=edges, weights=weights, boundary=boundary)


def is_partition(labeling: Labeling) -> bool:
    lbl = labeling.labels
    r = labeling.n_regions
    return (
        lbl.min() == 0
        and lbl.max() == r - 1
        and int(labeling.pixel_count.sum()) == lbl.size
        and np.array_equal(np.bincount(lbl.ravel(), minlength=r), labeling.pixel_count)
    )


def write_label_png(labeling: Labeling, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(labeling.labels.astype(np.uint16)).save(path)


def write_region_csv(labeling: Labeling, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["id", "size", "cx", "cy", "track_id"])
        for i in range(labeling.n_regions):
            wr.writerow(
                [i, int(labeling.pixel_count[i]), f"{labeling.centroid[i, 0]:.6f}",
                 f"{labeling.centroid[i, 1]:.6f}", int(labeling.track_id[i])]
            )
