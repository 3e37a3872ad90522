import numpy as np
import pytest
from scipy import ndimage

from vidsal.frame_io import Frame, to_lab


def textured_plane(shape, seed=0, sigma=1.5, amplitude=40.0, base=50.0):
    """Smooth random texture, periodic so that np.roll gives exact translations."""
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return base + amplitude * noise / noise.std()


def rgb_frame(rgb, index=0, stem=None):
    return Frame(rgb=np.asarray(rgb, dtype=np.uint8), index=index, stem=stem or f"{index:05d}")


def lab_frame(rgb, index=0):
    return to_lab(rgb_frame(rgb, index))


def random_rgb(shape, seed=0, smooth=2.0):
    rng = np.random.default_rng(seed)
    img = rng.standard_normal(shape + (3,))
    img = np.stack([ndimage.gaussian_filter(img[..., c], smooth) for c in range(3)], -1)
    img = (img - img.min()) / (np.ptp(img) + 1e-12)
    return np.rint(255 * img).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance tests append (name, passed, detail) here; the lines are echoed in
# the terminal summary so they show up even when output capture is on.
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
