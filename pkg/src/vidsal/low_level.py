"""Region contrast from color, lightness, texture orientation and motion histograms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import BinMismatch, EmptyRegion
from .frame_io import LabFrame
from .optical_flow import FlowField, flow_magnitude, flow_orientation
from .segmentation import Labeling

CHI2_EPS = 1e-10
FEATURES = ("color", "lightness", "orientation", "flow_mag", "flow_ori")
DEFAULT_LF_WEIGHTS = (0.4, 0.1, 0.1, 0.2, 0.2)
# energies below this are numerical noise from the FFT convolution
_ENERGY_FLOOR = 1e-8


@dataclass(frozen=True)
class GaborBank:
    gamma: float = 0.5
    wavelength: float = 8.0
    sigma_ratio: float = 0.56
    n_orient: int = 8

    @property
    def sigma(self) -> float:
        return self.sigma_ratio * self.wavelength

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_orient) * (math.pi / 4)

    @property
    def radius(self) -> int:
        return int(math.ceil(3 * self.sigma))

    def kernel(self, theta: float, phase: float) -> np.ndarray:
        r = self.radius
        y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
        xr = x * math.cos(theta) + y * math.sin(theta)
        yr = -x * math.sin(theta) + y * math.cos(theta)
        env = np.exp(-(xr**2 + self.gamma**2 * yr**2) / (2 * self.sigma**2))
        g = env * np.cos(2 * math.pi * yr / self.wavelength + phase)
        return g - g.mean()

    def pair(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """(even, odd) quadrature kernels for one orientation."""
        even = self.kernel(theta, 0.0)
        odd = self.kernel(theta, -math.pi / 2)
        # odd part: exact antisymmetry
        odd = 0.5 * (odd - odd[::-1, ::-1])
        even = 0.5 * (even + even[::-1, ::-1])
        return even, odd

    def kernels(self) -> list[np.ndarray]:
        out = []
        for th in self.thetas:
            out.extend(self.pair(th))
        return out


def _filter(plane: np.ndarray, kern: np.ndarray) -> np.ndarray:
    r = kern.shape[0] // 2
    padded = np.pad(plane, r, mode="symmetric")
    return fftconvolve(padded, kern, mode="valid")


def gabor_energy(l_plane: np.ndarray, bank: GaborBank | None = None):
    """Per-pixel dominant orientation index (0..7) and its quadrature energy."""
    bank = bank or GaborBank()
    plane = np.asarray(l_plane, dtype=np.float64)
    n = bank.n_orient
    energies = np.empty((n,) + plane.shape)
    half = n // 2
    for k in range(n):
        if k >= half and n % 2 == 0:
            # theta + pi: same even kernel, negated odd kernel -> same energy
            energies[k] = energies[k - half]
            continue
        even, odd = bank.pair(bank.thetas[k])
        energies[k] = np.hypot(_filter(plane, even), _filter(plane, odd))
    energies[energies < _ENERGY_FLOOR] = 0.0
    dominant = np.argmax(energies, axis=0)  # first maximum wins
    energy = np.take_along_axis(energies, dominant[None], axis=0)[0]
    return dominant, energy


@dataclass
class LowLevelHistograms:
    color: np.ndarray  # R x 64
    lightness: np.ndarray  # R x 16
    orientation: np.ndarray  # R x 16 (or 8)
    flow_mag: np.ndarray  # R x 16
    flow_ori: np.ndarray  # R x 9

    def feature(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @property
    def n_regions(self) -> int:
        return self.color.shape[0]


def _bin(values: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.int64)
    idx = np.floor((values - lo) / (hi - lo) * n).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def _region_hist(labels_flat, bins_flat, r, n, weights=None):
    h = np.bincount(labels_flat * n + bins_flat, weights=weights, minlength=r * n)
    return h.reshape(r, n).astype(np.float64)


def _normalize_rows(h: np.ndarray, fallback_uniform: bool = False) -> np.ndarray:
    s = h.sum(axis=1, keepdims=True)
    out = np.divide(h, s, out=np.zeros_like(h), where=s > 0)
    if fallback_uniform:
        out[s[:, 0] <= 0] = 1.0 / h.shape[1]
    return out


def resample_circular(h: np.ndarray, n_out: int) -> np.ndarray:
    """Linear interpolation of periodic histograms (rows) onto ``n_out`` bins."""
    n_in = h.shape[1]
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    return h[:, lo % n_in] * (1 - frac) + h[:, (lo + 1) % n_in] * frac


def region_histograms(
    labeling: Labeling,
    frame: LabFrame,
    gabor_out: tuple[np.ndarray, np.ndarray],
    flow: FlowField,
    orientation_bins: int = 16,
) -> LowLevelHistograms:
    labels = labeling.labels.ravel().astype(np.int64)
    r = labeling.n_regions
    counts = np.bincount(labels, minlength=r)
    if np.any(counts == 0):
        raise EmptyRegion(f"region {int(np.argmin(counts))} has no pixels")

    parts = []
    for plane, lo, hi in ((frame.l, 0.0, 100.0), (frame.a, -128.0, 127.0),
                          (frame.b, -128.0, 127.0), (frame.hue, 0.0, 360.0)):
        parts.append(_region_hist(labels, _bin(plane.ravel(), lo, hi, 16), r, 16))
    color = _normalize_rows(np.concatenate(parts, axis=1))
    lightness = _normalize_rows(_region_hist(labels, _bin(frame.l.ravel(), 0.0, 100.0, 16), r, 16))

    dominant, energy = gabor_out
    ori8 = _region_hist(labels, dominant.ravel().astype(np.int64), r, 8, weights=energy.ravel())
    ori = ori8 if orientation_bins == 8 else resample_circular(ori8, orientation_bins)
    # textureless regions: no orientation preference
    orientation = _normalize_rows(ori, fallback_uniform=True)

    mag = flow_magnitude(flow).ravel()
    top = float(np.percentile(mag, 99)) if mag.size else 0.0
    flow_mag = _normalize_rows(_region_hist(labels, _bin(mag, 0.0, top, 16), r, 16))
    ang = flow_orientation(flow).ravel()
    flow_ori = _normalize_rows(_region_hist(labels, _bin(ang, 0.0, 2 * math.pi, 9), r, 9))
    return LowLevelHistograms(color, lightness, orientation, flow_mag, flow_ori)


def chi_square(h1, h2) -> float:
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise BinMismatch(f"histogram lengths differ: {h1.shape} vs {h2.shape}")
    return float(0.5 * np.sum((h1 - h2) ** 2 / (h1 + h2 + CHI2_EPS)))


def pairwise_chi_square(h: np.ndarray) -> np.ndarray:
    """R x R matrix of chi-square distances between histogram rows."""
    diff = h[:, None, :] - h[None, :, :]
    tot = h[:, None, :] + h[None, :, :] + CHI2_EPS
    return 0.5 * np.sum(diff * diff / tot, axis=-1)


def minmax(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Scale to [0, 1]; a (numerically) constant vector maps to all zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= tol * max(1.0, abs(hi)):
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _feature_distances(hists: LowLevelHistograms, name: str, color_mode: str) -> np.ndarray:
    h = hists.feature(name)
    if name == "color" and color_mode == "per-channel":
        # 4 channels of 16 bins, each renormalized, distances summed
        d = np.zeros((h.shape[0], h.shape[0]))
        for c in range(4):
            d += pairwise_chi_square(_normalize_rows(h[:, 16 * c : 16 * (c + 1)]))
        return d
    return pairwise_chi_square(h)


def low_level_contributions(
    hists: LowLevelHistograms,
    centroids: np.ndarray,
    sizes: np.ndarray,
    weights=DEFAULT_LF_WEIGHTS,
    sigma_spdst: float = 0.2,
    color_mode: str = "joint",
) -> np.ndarray:
    """R x 5 weighted contrast per feature, before normalization."""
    c = np.asarray(centroids, dtype=np.float64)
    d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=-1)
    omega = np.exp(-d2 / sigma_spdst**2)
    np.fill_diagonal(omega, 0.0)
    kern = omega * np.asarray(sizes, dtype=np.float64)[None, :]
    out = np.empty((c.shape[0], len(FEATURES)))
    for f, name in enumerate(FEATURES):
        out[:, f] = weights[f] * np.sum(kern * _feature_distances(hists, name, color_mode), axis=1)
    return out


def low_level_map(hists, centroids, sizes, weights=DEFAULT_LF_WEIGHTS, sigma_spdst=0.2,
                  color_mode="joint") -> np.ndarray:
    """Per-region low-level saliency in [0, 1] (min-max over the frame/scale)."""
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("low-level feature weights must sum to 1")
    contrib = low_level_contributions(hists, centroids, sizes, weights, sigma_spdst, color_mode)
    return minmax(contrib.sum(axis=1))


def write_debug_csv(path, s_lf: np.ndarray, contributions: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["region", "s_lf", *FEATURES])
        for i in range(s_lf.size):
            wr.writerow([i, f"{s_lf[i]:.6f}", *(f"{v:.6g}" for v in contributions[i])])
