"""Region properties: center bias, objectness, boundary connectivity and movement."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.stats import rankdata

from .frame_io import LabFrame
from .low_level import minmax
from .optical_flow import FlowField, flow_magnitude, resize_bilinear
from .segmentation import Labeling, RegionGraph, adjacency

DEFAULT_MF_WEIGHTS = (0.15, 0.05, 0.4, 0.4)
# csgraph drops explicit zeros; identical colors still need an edge
_ZERO_EDGE = 1e-12


@dataclass
class MidLevelScores:
    center: np.ndarray
    objectness: np.ndarray
    background: np.ndarray
    movement: np.ndarray  # normalized to [0, 1] per frame/scale

    def stack(self) -> np.ndarray:
        return np.column_stack([self.center, self.objectness, self.background, self.movement])


@dataclass
class ObjectnessMap:
    values: np.ndarray
    source: str = "computed"  # or "loaded"


def _region_mean(labels: np.ndarray, values: np.ndarray, r: int | None = None) -> np.ndarray:
    flat = labels.ravel()
    r = int(flat.max()) + 1 if r is None else r
    counts = np.bincount(flat, minlength=r)
    sums = np.bincount(flat, weights=np.asarray(values, dtype=np.float64).ravel(), minlength=r)
    return sums / np.maximum(counts, 1)


def center_weight_map(shape: tuple[int, int], sigma_cen: float = 0.3) -> np.ndarray:
    """exp(-D^2 / sigma^2) with D measured in half-diagonals from the frame center."""
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    half_diag = 0.5 * math.hypot(w - 1, h - 1) or 1.0
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = ((xs - cx) ** 2 + (ys - cy) ** 2) / half_diag**2
    return np.exp(-d2 / sigma_cen**2)


def center_bias(labeling: Labeling, sigma_cen: float = 0.3) -> np.ndarray:
    """Mean center weight over each region's pixels."""
    return _region_mean(labeling.labels, center_weight_map(labeling.shape, sigma_cen), labeling.n_regions)


def region_center_bias(mask: np.ndarray, sigma_cen: float = 0.3) -> float:
    """Center bias of a single region given as a boolean mask."""
    return float(center_weight_map(mask.shape, sigma_cen)[mask].mean())


# ---------------------------------------------------------------- objectness


def spectral_residual(plane: np.ndarray, width: int = 64) -> np.ndarray:
    """Spectral-residual saliency scaled to [0, 1]; flat inputs give zeros."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if plane.std() < 1e-6:
        return np.zeros_like(plane)
    sw = min(width, w)
    sh = max(1, int(round(h * sw / w)))
    small = resize_bilinear(plane, (sh, sw))
    spectrum = np.fft.fft2(small)
    amp = np.log(np.abs(spectrum) + 1e-9)
    phase = np.angle(spectrum)
    residual = amp - ndimage.uniform_filter(amp, size=3, mode="wrap")
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, 2.5 * sw / 64.0)
    sal = resize_bilinear(sal, (h, w))
    top = sal.max()
    return sal / top if top > 0 else np.zeros_like(sal)


def _integral(img: np.ndarray) -> np.ndarray:
    out = np.zeros((img.shape[0] + 1, img.shape[1] + 1) + img.shape[2:], dtype=np.float64)
    out[1:, 1:] = img.cumsum(0).cumsum(1)
    return out


def _box(ii: np.ndarray, x0, y0, x1, y1):
    """Sums over [y0:y1, x0:x1] for vectors of boxes."""
    return ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]


def sample_windows(shape, n: int, min_frac: float = 0.1, seed: int = 0) -> np.ndarray:
    """n x 4 integer windows (x0, y0, x1, y1), uniform over size then position."""
    h, w = shape
    rng = np.random.default_rng(seed)
    min_w = max(1, int(math.ceil(min_frac * w)))
    min_h = max(1, int(math.ceil(min_frac * h)))
    ww = rng.integers(min_w, w + 1, size=n)
    hh = rng.integers(min_h, h + 1, size=n)
    x0 = (rng.random(n) * (w - ww + 1)).astype(np.int64)
    y0 = (rng.random(n) * (h - hh + 1)).astype(np.int64)
    return np.column_stack([x0, y0, x0 + ww, y0 + hh])


def _lab_bins(frame: LabFrame, n: int = 16) -> np.ndarray:
    """One-hot H x W x 3n array of quantized L, a, b."""
    h, w = frame.shape
    out = np.zeros((h, w, 3 * n))
    for c, (plane, lo, hi) in enumerate(
        ((frame.l, 0.0, 100.0), (frame.a, -128.0, 127.0), (frame.b, -128.0, 127.0))
    ):
        idx = np.clip(np.floor((plane - lo) / (hi - lo) * n).astype(int), 0, n - 1)
        np.put_along_axis(out, (c * n + idx)[..., None], 1.0, axis=2)
    return out


def _cue_likelihood(s: np.ndarray):
    s = np.clip(s, 0.0, 1.0)
    return 0.25 + 0.5 * s, 0.75 - 0.5 * s


def window_cues(frame: LabFrame, labels: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """n x 4 cue scores (MS, CC, ED, SS) in [0, 1]."""
    h, w = frame.shape
    x0, y0, x1, y1 = (windows[:, i] for i in range(4))
    area = ((x1 - x0) * (y1 - y0)).astype(np.float64)

    ms_ii = _integral(spectral_residual(frame.l))
    ms = _box(ms_ii, x0, y0, x1, y1) / area

    # color contrast against the surrounding ring (window grown 2x about its center)
    hist_ii = _integral(_lab_bins(frame))
    ww, hh = x1 - x0, y1 - y0
    ox0 = np.clip(x0 - ww // 2, 0, w)
    ox1 = np.clip(x1 + (ww - ww // 2), 0, w)
    oy0 = np.clip(y0 - hh // 2, 0, h)
    oy1 = np.clip(y1 + (hh - hh // 2), 0, h)
    inner = _box(hist_ii, x0, y0, x1, y1)
    ring = _box(hist_ii, ox0, oy0, ox1, oy1) - inner
    inner_n = inner / np.maximum(inner.sum(axis=1, keepdims=True), 1e-12)
    ring_sum = ring.sum(axis=1, keepdims=True)
    ring_n = ring / np.maximum(ring_sum, 1e-12)
    # each histogram holds 3 channels, so the chi-square is scaled back to [0, 1]
    cc = 0.5 * np.sum((inner_n - ring_n) ** 2 / (inner_n + ring_n + 1e-10), axis=1) / 3.0
    cc = np.where(ring_sum[:, 0] > 0, cc, 0.0)

    # edge density in the inner ring (window minus its central half-size core)
    gx = ndimage.sobel(frame.l, axis=1, mode="nearest")
    gy = ndimage.sobel(frame.l, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    edges = (mag > max(mag.mean() + mag.std(), 1e-6)).astype(np.float64)
    e_ii = _integral(edges)
    cx0 = x0 + ww // 4
    cx1 = x1 - ww // 4
    cy0 = y0 + hh // 4
    cy1 = y1 - hh // 4
    ring_area = area - (cx1 - cx0) * (cy1 - cy0)
    ed = (_box(e_ii, x0, y0, x1, y1) - _box(e_ii, cx0, cy0, cx1, cy1)) / np.maximum(ring_area, 1)

    # superpixel straddling
    r = int(labels.max()) + 1
    totals = np.bincount(labels.ravel(), minlength=r)
    ss = np.empty(windows.shape[0])
    for i in range(windows.shape[0]):
        inside = np.bincount(labels[y0[i] : y1[i], x0[i] : x1[i]].ravel(), minlength=r)
        ss[i] = 1.0 - np.minimum(inside, totals - inside).sum() / area[i]
    return np.column_stack([ms, cc, ed, ss])


def objectness(
    frame: LabFrame,
    labeling: Labeling,
    n_windows: int = 1000,
    min_frac: float = 0.1,
    seed: int = 0,
) -> ObjectnessMap:
    """Pixel objectness: mean naive-Bayes posterior of the sampled windows covering each pixel."""
    h, w = frame.shape
    windows = sample_windows((h, w), n_windows, min_frac, seed)
    cues = window_cues(frame, labeling.labels, windows)
    # MS, CC and ED have uncalibrated scales; percentile ranks within the frame
    # put them on the [0, 1] scale the likelihood tables expect. SS is already
    # a fraction and stays as is.
    if n_windows > 1:
        cues[:, :3] = (rankdata(cues[:, :3], axis=0) - 1.0) / (n_windows - 1)
    p_obj, p_bg = _cue_likelihood(cues)
    num = 0.5 * np.prod(p_obj, axis=1)
    post = num / (num + 0.5 * np.prod(p_bg, axis=1))

    acc = np.zeros((h + 1, w + 1))
    cover = np.zeros((h + 1, w + 1))
    x0, y0, x1, y1 = (windows[:, i] for i in range(4))
    for arr, val in ((acc, post), (cover, np.ones_like(post))):
        np.add.at(arr, (y0, x0), val)
        np.add.at(arr, (y0, x1), -val)
        np.add.at(arr, (y1, x0), -val)
        np.add.at(arr, (y1, x1), val)
    acc = acc.cumsum(0).cumsum(1)[:h, :w]
    cover = np.rint(cover.cumsum(0).cumsum(1)[:h, :w])
    fill = float(post.mean()) if post.size else 0.0
    values = np.where(cover > 0, acc / np.maximum(cover, 1), fill)
    return ObjectnessMap(values=np.clip(values, 0.0, 1.0), source="computed")


def load_objectness(path) -> ObjectnessMap:
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"), dtype=np.float64)
    return ObjectnessMap(values=gray / 255.0, source="loaded")


def find_objectness_file(directory, stem: str) -> Path | None:
    directory = Path(directory)
    for suffix in (".png", ".pgm", ".ppm"):
        p = directory / f"{stem}{suffix}"
        if p.is_file():
            return p
    return None


def region_objectness(labeling: Labeling, omap: ObjectnessMap) -> np.ndarray:
    return _region_mean(labeling.labels, omap.values, labeling.n_regions)


# ------------------------------------------------------- background prior


def geodesic_distances(graph: RegionGraph) -> np.ndarray:
    """All-pairs shortest path costs over the region graph (inf when unreachable)."""
    n = graph.n_nodes
    if len(graph.edges) == 0:
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0.0)
        return d
    wts = np.asarray(graph.weights, dtype=np.float64) + _ZERO_EDGE
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    mat = coo_matrix((wts, (i, j)), shape=(n, n)).tocsr()
    d = dijkstra(mat, directed=False)
    # undo the epsilon on zero-cost paths
    d[d < 1e-9] = 0.0
    return d


def background_prior(
    graph: RegionGraph,
    sigma_clr: float = 10.0,
    sigma_bgr: float = 1.0,
    mode: str = "soft",
) -> np.ndarray:
    """exp(-BndCon^2 / (2 sigma_bgr^2)) per region; high for regions cut off from the border."""
    d = geodesic_distances(graph)
    bnd = np.asarray(graph.boundary, dtype=bool)
    if mode == "soft":
        a = np.exp(-(d**2) / (2 * sigma_clr**2))
        a[~np.isfinite(d)] = 0.0
        len_bnd = a[:, bnd].sum(axis=1)
        span = a.sum(axis=1)
    elif mode == "literal":
        dd = np.where(np.isfinite(d), d, 0.0)
        len_bnd = dd[:, bnd].sum(axis=1)
        span = dd.sum(axis=1)
    else:
        raise ValueError(f"unknown boundary-connectivity mode {mode!r}")
    bndcon = np.divide(len_bnd, np.sqrt(span), out=np.zeros_like(len_bnd), where=span > 0)
    return np.exp(-(bndcon**2) / (2 * sigma_bgr**2))


# ---------------------------------------------------------------- movement


def movement(labeling: Labeling, flow: FlowField) -> np.ndarray:
    """Mean flow magnitude per region (raw, pixels/frame)."""
    return _region_mean(labeling.labels, flow_magnitude(flow), labeling.n_regions)


def mid_level_map(scores: MidLevelScores, weights=DEFAULT_MF_WEIGHTS) -> np.ndarray:
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("middle-level feature weights must sum to 1")
    raw = scores.stack() @ np.asarray(weights, dtype=np.float64)
    return minmax(raw)


def mid_level_scores(
    labeling: Labeling,
    frame: LabFrame,
    flow: FlowField,
    omap: ObjectnessMap,
    sigma_cen: float = 0.3,
    sigma_clr: float = 10.0,
    sigma_bgr: float = 1.0,
    bndcon_mode: str = "soft",
    graph: RegionGraph | None = None,
) -> MidLevelScores:
    graph = graph if graph is not None else adjacency(labeling, frame)
    return MidLevelScores(
        center=center_bias(labeling, sigma_cen),
        objectness=region_objectness(labeling, omap),
        background=background_prior(graph, sigma_clr, sigma_bgr, bndcon_mode),
        movement=minmax(movement(labeling, flow)),
    )
