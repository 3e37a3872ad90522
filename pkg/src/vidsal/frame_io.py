"""Frame sequences, ground-truth masks, color conversion and saliency rasters.

Dataset layout::

    <root>/<video>/frames/*.png   (or .ppm / .pgm)
    <root>/<video>/gt/*.png       (stem matches the frame stem; may be sparse)
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, InvalidSaliency, NoFrames

FRAME_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")

# sRGB (D65) -> XYZ
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


@dataclass
class Frame:
    rgb: np.ndarray  # H x W x 3 uint8
    index: int = 0
    stem: str = ""

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


@dataclass
class LabFrame:
    l: np.ndarray
    a: np.ndarray
    b: np.ndarray
    hue: np.ndarray
    index: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.l.shape

    def lab_stack(self) -> np.ndarray:
        """H x W x 3 array of (L, a, b)."""
        return np.stack([self.l, self.a, self.b], axis=-1)


def natural_key(name: str):
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r"(\d+)", name)]


def _read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def load_frame_sequence(directory, pattern: str = "*") -> list[Frame]:
    """Load every PNG/PPM/PGM file matching ``pattern``, in natural filename order.

    Raises NoFrames when nothing matches and DimensionMismatch(i) when frame
    ``i`` differs in size from frame 0.
    """
    directory = Path(directory)
    paths = [
        p
        for p in directory.glob(pattern)
        if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
    ]
    if not paths:
        raise NoFrames(f"no frames matching {pattern!r} in {directory}")
    paths.sort(key=lambda p: natural_key(p.name))

    frames = []
    for i, p in enumerate(paths):
        rgb = _read_rgb(p)
        if frames and rgb.shape != frames[0].rgb.shape:
            raise DimensionMismatch(i, frames[0].rgb.shape[:2], rgb.shape[:2])
        frames.append(Frame(rgb=rgb, index=i, stem=p.stem))
    return frames


def load_mask(path) -> np.ndarray:
    """Binary mask (bool) from a grayscale raster; pixels >= 128 are foreground."""
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"), dtype=np.uint8)
    return gray >= 128


def load_ground_truth(gt_dir, stems) -> dict[str, np.ndarray]:
    """Masks for those stems that have an annotation file; others are skipped."""
    gt_dir = Path(gt_dir)
    out = {}
    if not gt_dir.is_dir():
        return out
    by_stem = {p.stem: p for p in gt_dir.iterdir() if p.suffix.lower() in FRAME_SUFFIXES}
    for stem in stems:
        if stem in by_stem:
            out[stem] = load_mask(by_stem[stem])
    return out


def list_videos(root) -> list[Path]:
    root = Path(root)
    vids = [p for p in root.iterdir() if (p / "frames").is_dir()]
    return sorted(vids, key=lambda p: natural_key(p.name))


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def rgb_to_hue(rgb: np.ndarray) -> np.ndarray:
    """HSV hue in degrees, [0, 360). Achromatic pixels get hue 0."""
    c = rgb.astype(np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.zeros_like(mx)
    is_r = (mx == r) & (delta > 0)
    is_g = (mx == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    hue = np.where(is_r, 60.0 * np.mod((g - b) / safe, 6.0), hue)
    hue = np.where(is_g, 60.0 * ((b - r) / safe + 2.0), hue)
    hue = np.where(is_b, 60.0 * ((r - g) / safe + 4.0), hue)
    hue = np.mod(hue, 360.0)
    # mod can return exactly 360.0 for tiny negative inputs
    hue[hue >= 360.0] = 0.0
    return hue


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """H x W x 3 uint8 sRGB -> H x W x 3 float64 CIELAB (D65)."""
    lin = _srgb_to_linear(rgb.astype(np.float64) / 255.0)
    xyz = lin @ _RGB2XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack(
        [np.clip(L, 0.0, 100.0), np.clip(a, -128.0, 127.0), np.clip(b, -128.0, 127.0)],
        axis=-1,
    )


def to_lab(frame: Frame) -> LabFrame:
    lab = rgb_to_lab(frame.rgb)
    return LabFrame(
        l=np.ascontiguousarray(lab[..., 0]),
        a=np.ascontiguousarray(lab[..., 1]),
        b=np.ascontiguousarray(lab[..., 2]),
        hue=rgb_to_hue(frame.rgb),
        index=frame.index,
    )


def saliency_to_bytes(smap: np.ndarray) -> np.ndarray:
    smap = np.asarray(smap, dtype=np.float64)
    if not np.all(np.isfinite(smap)) or smap.min(initial=0.0) < 0.0 or smap.max(initial=0.0) > 1.0:
        raise InvalidSaliency("saliency values must lie in [0, 1]")
    # round half up
    return np.floor(255.0 * smap + 0.5).astype(np.uint8)


def write_saliency(smap: np.ndarray, path) -> None:
    """Write a [0,1] map as an 8-bit grayscale PNG, byte = round(255 * s)."""
    data = saliency_to_bytes(smap)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path)


def read_saliency(path) -> np.ndarray:
    """8-bit map as uint8 array (callers divide by 255 for [0,1])."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def write_rgb(rgb: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)


def write_mask(mask: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)
