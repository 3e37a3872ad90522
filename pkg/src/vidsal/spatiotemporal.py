"""Spatial combination, adaptive temporal smoothing and cross-scale fusion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import MapMismatch
from .low_level import minmax
from .optical_flow import FlowField, flow_magnitude
from .segmentation import Labeling


@dataclass(frozen=True)
class AtwParams:
    max_window: int = 10
    lam: float = 2.0
    sigma_tpdst: float = 10.0

    def __post_init__(self):
        if self.max_window < 1:
            raise ValueError("max_window must be >= 1")


@dataclass(frozen=True)
class McaParams:
    iterations: int = 5
    coupling: float = 0.15
    delta: float = 1e-4
    mode: str = "logodds"  # or "odds" (the form printed in the algorithm table)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in ("logodds", "odds"):
            raise ValueError(f"unknown MCA mode {self.mode!r}")


def combine_spatial(s_lf, s_mf, alpha: float = 0.5) -> np.ndarray:
    """Weighted geometric combination s_lf^alpha * s_mf^(1-alpha), min-max normalized."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    s_lf = np.asarray(s_lf, dtype=np.float64)
    s_mf = np.asarray(s_mf, dtype=np.float64)
    # numpy defines 0.0 ** 0 == 1, which gives the single-map modes at alpha in {0, 1}
    return minmax(np.power(s_lf, alpha) * np.power(s_mf, 1.0 - alpha))


def region_motion_stats(labeling: Labeling, flow: FlowField):
    """Per-region mean, population std and coefficient of variation of flow magnitude."""
    flat = labeling.labels.ravel()
    r = labeling.n_regions
    mag = flow_magnitude(flow).ravel()
    n = np.bincount(flat, minlength=r).astype(np.float64)
    mu = np.bincount(flat, weights=mag, minlength=r) / n
    dev = mag - mu[flat]
    sigma = np.sqrt(np.bincount(flat, weights=dev * dev, minlength=r) / n)
    beta = np.divide(sigma, mu, out=np.zeros_like(mu), where=mu > 0)
    return mu, sigma, beta


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def window_size(mu: float, beta: float, params: AtwParams = AtwParams(), t: int | None = None) -> int:
    """Number of past frames to blend for a region with motion statistics (mu, beta)."""
    m = params.max_window
    if mu <= 0:
        phi_real = float(m)
    elif beta <= 0:
        phi_real = 0.0
    else:
        phi_real = m * math.exp(-mu * params.lam / beta)
    phi = _round_half_away(phi_real)
    upper = m if t is None else min(m, t)
    return max(0, min(phi, upper))


def window_sizes(mu, beta, params: AtwParams, t: int) -> np.ndarray:
    return np.array([window_size(float(a), float(b), params, t) for a, b in zip(mu, beta)], dtype=np.int64)


def temporal_smooth(
    current: np.ndarray,
    tracks: np.ndarray,
    phi: np.ndarray,
    history: Sequence[Mapping[int, float]],
    sigma_tpdst: float = 10.0,
) -> np.ndarray:
    """Gaussian-weighted average of each region's track over its last ``phi`` frames.

    ``history[-1]`` maps track id -> spatial saliency at t-1, ``history[-2]`` at
    t-2, and so on. Frames where the track is absent are skipped and the weights
    renormalized over the frames that remain.
    """
    current = np.asarray(current, dtype=np.float64)
    out = current.copy()
    for i in range(current.size):
        p = int(phi[i])
        if p <= 0:
            continue
        tid = int(tracks[i])
        num = current[i]
        den = 1.0
        for dt in range(1, min(p, len(history)) + 1):
            val = history[-dt].get(tid)
            if val is None:
                continue
            wgt = math.exp(-(dt * dt) / (2.0 * p * p * sigma_tpdst**2))
            num += wgt * val
            den += wgt
        out[i] = num / den
    return out


def rasterize(values: np.ndarray, labeling: Labeling) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)[labeling.labels]


def otsu(smap: np.ndarray) -> float:
    """Otsu threshold of a [0, 1] map over 256 bins.

    Bins are ``round(255 * s)``; the returned threshold sits halfway between
    the last bin of the low class and the next bin. Among equally good cuts
    the lowest one wins. A map that fills a single bin returns its mean.
    """
    v = np.asarray(smap, dtype=np.float64).ravel()
    bins = np.clip(np.floor(255.0 * v + 0.5), 0, 255).astype(np.int64)
    hist = np.bincount(bins, minlength=256).astype(np.float64)
    if np.count_nonzero(hist) <= 1:
        # a constant map returns its value exactly
        return float(v[0]) if v.min() == v.max() else float(v.mean())
    p = hist / hist.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(p)[:-1]
    m0 = np.cumsum(p * levels)[:-1]
    mt = float(np.sum(p * levels))
    w1 = 1.0 - w0
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(255)
    between[valid] = (mt * w0[valid] - m0[valid]) ** 2 / (w0[valid] * w1[valid])
    t = int(np.argmax(between))
    return (t + 0.5) / 255.0


def _logit(x):
    return np.log(x / (1.0 - x))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def mca_fuse(maps: Sequence[np.ndarray], params: McaParams = McaParams(), return_history: bool = False):
    """Multi-layer cellular automaton fusion of per-scale maps.

    Each layer's log-odds is pushed up or down by the binarized votes of the
    other layers for ``iterations - 1`` synchronous steps; the result is the
    mean of the refined layers. With ``return_history`` the per-step stack of
    layer maps is returned as well.
    """
    if len(maps) == 0:
        raise MapMismatch("no maps to fuse")
    shape = np.shape(maps[0])
    if any(np.shape(m) != shape for m in maps):
        raise MapMismatch("all maps must share dimensions")
    d = params.delta
    s = np.stack([np.clip(np.asarray(m, dtype=np.float64), d, 1.0 - d) for m in maps])
    thr = np.clip(np.array([otsu(m) for m in maps]), d, 1.0 - d)
    thr = thr.reshape((s.shape[0],) + (1,) * len(shape))
    # thresholds live in the same representation as the layer states
    if params.mode == "logodds":
        lam, gamma = _logit(s), _logit(thr)
    else:
        lam, gamma = s / (1.0 - s), thr / (1.0 - thr)
    history = [s.copy()]
    for _ in range(params.iterations - 1):
        votes = np.sign(lam - gamma)
        lam = lam + params.coupling * (votes.sum(axis=0, keepdims=True) - votes)
        if params.mode == "logodds":
            cur = _sigmoid(lam)
        else:
            lam = np.maximum(lam, 0.0)
            cur = lam / (1.0 + lam)
        history.append(cur)
    fused = np.clip(history[-1].mean(axis=0), 0.0, 1.0)
    if return_history:
        return fused, history
    return fused
