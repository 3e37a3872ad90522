"""Dense optical flow by coarse-to-fine Horn-Schunck on the lightness plane."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels

MIN_PYRAMID_SIDE = 8
_FLO_MAGIC = b"FLO1"


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    scale_factor: float = 0.5
    smoothness_alpha: float = 15.0
    iterations_per_level: int = 100
    presmooth_sigma: float = 1.0

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0.0 < self.scale_factor < 1.0:
            raise ValueError("scale_factor must lie in (0, 1)")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    from_index: int = 0
    to_index: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def zeros(cls, shape, from_index=0, to_index=0) -> "FlowField":
        return cls(np.zeros(shape), np.zeros(shape), from_index, to_index)


def resize_bilinear(plane: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment and replicated edges."""
    h, w = plane.shape
    nh, nw = shape
    if (nh, nw) == (h, w):
        return plane.astype(np.float64, copy=True)
    ry = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    rx = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    yy, xx = np.meshgrid(ry, rx, indexing="ij")
    return ndimage.map_coordinates(plane.astype(np.float64), [yy, xx], order=1, mode="nearest")


def _next_shape(shape, factor):
    return tuple(max(1, int(round(n * factor))) for n in shape)


def build_pyramid(plane: np.ndarray, levels: int, scale_factor: float) -> list[np.ndarray]:
    """Gaussian pyramid, finest first. Levels whose side would drop below 8 px are dropped."""
    plane = np.asarray(plane, dtype=np.float64)
    out = [plane]
    sigma = 0.5 / scale_factor
    while len(out) < levels:
        nxt = _next_shape(out[-1].shape, scale_factor)
        if min(nxt) < MIN_PYRAMID_SIDE:
            break
        blurred = ndimage.gaussian_filter(out[-1], sigma, mode="nearest")
        out.append(resize_bilinear(blurred, nxt))
    return out


def _gradients(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(f, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) * 0.5
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) * 0.5
    return gx, gy


def warp(plane: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``plane`` at (x+u, y+v), bilinear, edge-replicated."""
    h, w = plane.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return ndimage.map_coordinates(plane, [yy + v, xx + u], order=1, mode="nearest")


def _inside(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = u.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    x, y = xx + u, yy + v
    return (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)


def estimate_flow(prev_l: np.ndarray, next_l: np.ndarray, params: FlowParams | None = None,
                  from_index: int = 0, to_index: int = 1) -> FlowField:
    """Flow (u, v) on the grid of ``prev_l`` such that prev(x) ~ next(x + flow)."""
    params = params or FlowParams()
    prev_l = np.asarray(prev_l, dtype=np.float64)
    next_l = np.asarray(next_l, dtype=np.float64)
    if prev_l.shape != next_l.shape:
        raise ValueError("flow inputs must share dimensions")
    if params.presmooth_sigma > 0:
        prev_l = ndimage.gaussian_filter(prev_l, params.presmooth_sigma, mode="nearest")
        next_l = ndimage.gaussian_filter(next_l, params.presmooth_sigma, mode="nearest")

    pyr0 = build_pyramid(prev_l, params.pyramid_levels, params.scale_factor)
    pyr1 = build_pyramid(next_l, params.pyramid_levels, params.scale_factor)
    alpha2 = params.smoothness_alpha**2

    u = np.zeros(pyr0[-1].shape)
    v = np.zeros(pyr0[-1].shape)
    for lvl in range(len(pyr0) - 1, -1, -1):
        f0, f1 = pyr0[lvl], pyr1[lvl]
        if u.shape != f0.shape:
            sy = f0.shape[0] / u.shape[0]
            sx = f0.shape[1] / u.shape[1]
            u = resize_bilinear(u, f0.shape) * sx
            v = resize_bilinear(v, f0.shape) * sy
        warped = warp(f1, u, v)
        gx0, gy0 = _gradients(f0)
        gx1, gy1 = _gradients(warped)
        ix = 0.5 * (gx0 + gx1)
        iy = 0.5 * (gy0 + gy1)
        it = warped - f0
        # no data term where the warped sample leaves the frame; smoothness fills in
        outside = ~_inside(u, v)
        ix[outside] = 0.0
        iy[outside] = 0.0
        it[outside] = 0.0
        u, v = kernels.hs_iterate(ix, iy, it, u, v, alpha2, params.iterations_per_level)

    u = np.nan_to_num(u, nan=0.0, posinf=0.0, neginf=0.0)
    v = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
    return FlowField(u=u, v=v, from_index=from_index, to_index=to_index)


def flow_magnitude(flow: FlowField) -> np.ndarray:
    return np.hypot(flow.u, flow.v)


def flow_orientation(flow: FlowField) -> np.ndarray:
    """atan2(v, u) mapped to [0, 2*pi); zero vectors get 0."""
    ang = np.mod(np.arctan2(flow.v, flow.u), 2 * np.pi)
    ang[(flow.u == 0) & (flow.v == 0)] = 0.0
    ang[ang >= 2 * np.pi] = 0.0
    return ang


def write_flow(flow: FlowField, path) -> None:
    """Binary dump: b"FLO1", int32 width, int32 height, then u and v as little-endian f32."""
    h, w = flow.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(np.asarray(flow.u, dtype="<f4").tobytes())
        fh.write(np.asarray(flow.v, dtype="<f4").tobytes())


def read_flow(path) -> FlowField:
    with open(path, "rb") as fh:
        if fh.read(4) != _FLO_MAGIC:
            raise ValueError(f"{path} is not a FLO1 file")
        w, h = struct.unpack("<ii", fh.read(8))
        data = np.frombuffer(fh.read(8 * w * h), dtype="<f4")
    u = data[: w * h].reshape(h, w).astype(np.float64)
    v = data[w * h :].reshape(h, w).astype(np.float64)
    return FlowField(u=u, v=v)
