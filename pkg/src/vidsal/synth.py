"""Synthetic videos with exact ground truth for end-to-end checks."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .frame_io import write_mask, write_rgb

KINDS = ("moving_square", "static_blob", "two_objects")


def _texture(rng: np.random.Generator, shape, base, spread, smooth=1.2) -> np.ndarray:
    """Smoothed color noise around ``base`` (RGB) with per-channel amplitude ``spread``."""
    h, w = shape
    noise = rng.standard_normal((h, w, 3))
    noise = np.stack([ndimage.gaussian_filter(noise[..., c], smooth, mode="wrap") for c in range(3)], -1)
    noise /= max(float(noise.std()), 1e-9)
    img = np.asarray(base, dtype=np.float64) + noise * np.asarray(spread, dtype=np.float64)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _bounce(start: int, step: int, t: int, lo: int, hi: int) -> int:
    """Position after t steps, reflecting off [lo, hi]."""
    span = hi - lo
    if span <= 0:
        return lo
    p = (start - lo + step * t) % (2 * span)
    return lo + (p if p <= span else 2 * span - p)


def _paste(frame, mask, patch, x, y):
    s_h, s_w = patch.shape[:2]
    frame[y : y + s_h, x : x + s_w] = patch
    mask[y : y + s_h, x : x + s_w] = True


def moving_square(n_frames: int = 32, width: int = 160, height: int = 120, seed: int = 0):
    """Textured square (side 20% of the width) moving 2 px/frame over a textured background."""
    rng = np.random.default_rng(seed)
    bg = _texture(rng, (height, width), (70, 110, 90), (8, 8, 8))
    side = max(2, int(round(0.2 * width)))
    side = min(side, height, width)
    patch = _texture(rng, (side, side), (215, 70, 50), (18, 18, 18))
    x0 = int(round(0.05 * width))
    y = (height - side) // 2
    frames, masks = [], []
    for t in range(n_frames):
        x = _bounce(x0, 2, t, 0, width - side)
        img = bg.copy()
        m = np.zeros((height, width), dtype=bool)
        _paste(img, m, patch, x, y)
        frames.append(img)
        masks.append(m)
    return frames, masks


def static_blob(n_frames: int = 16, width: int = 160, height: int = 120, seed: int = 0):
    """A still textured disk slightly off center."""
    rng = np.random.default_rng(seed)
    bg = _texture(rng, (height, width), (90, 90, 120), (12, 12, 12))
    fg = _texture(rng, (height, width), (230, 200, 60), (15, 15, 15))
    yy, xx = np.mgrid[0:height, 0:width]
    r = 0.18 * min(width, height)
    cx, cy = 0.55 * width, 0.45 * height
    m = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img = np.where(m[..., None], fg, bg)
    return [img.copy() for _ in range(n_frames)], [m.copy() for _ in range(n_frames)]


def two_objects(n_frames: int = 32, width: int = 160, height: int = 120, seed: int = 0):
    """Two squares in separate horizontal bands moving in opposite directions."""
    rng = np.random.default_rng(seed)
    bg = _texture(rng, (height, width), (80, 100, 80), (12, 12, 12))
    side = max(2, int(round(0.15 * min(width, height))))
    a = _texture(rng, (side, side), (220, 60, 60), (15, 15, 15))
    b = _texture(rng, (side, side), (60, 80, 220), (15, 15, 15))
    ya = max(0, int(round(0.15 * height)))
    yb = min(height - side, int(round(0.6 * height)))
    if yb < ya + side:
        raise ValueError("frame too small for two disjoint objects")
    frames, masks = [], []
    for t in range(n_frames):
        img = bg.copy()
        m = np.zeros((height, width), dtype=bool)
        _paste(img, m, a, _bounce(0, 2, t, 0, width - side), ya)
        _paste(img, m, b, _bounce(width - side, -2, t, 0, width - side), yb)
        frames.append(img)
        masks.append(m)
    return frames, masks


_MAKERS = {"moving_square": moving_square, "static_blob": static_blob, "two_objects": two_objects}


def generate(kind: str, n_frames: int, width: int, height: int, seed: int = 0):
    if kind not in _MAKERS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {', '.join(KINDS)}")
    if n_frames < 1 or width < 8 or height < 8:
        raise ValueError("need at least 1 frame and 8x8 pixels")
    return _MAKERS[kind](n_frames, width, height, seed)


def write_dataset(root, kind: str, n_frames: int = 32, width: int = 160, height: int = 120,
                  seed: int = 0, name: str | None = None) -> Path:
    """Write ``<root>/<name>/frames/*.png`` and ``gt/*.png``; returns the video directory."""
    frames, masks = generate(kind, n_frames, width, height, seed)
    vdir = Path(root) / (name or kind)
    for t, (img, m) in enumerate(zip(frames, masks)):
        write_rgb(img, vdir / "frames" / f"{t:05d}.png")
        write_mask(m, vdir / "gt" / f"{t:05d}.png")
    return vdir
