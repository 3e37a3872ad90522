"""Time the compiled kernels against the NumPy fallback on realistic inputs.

Usage::

    python benchmarks/bench_kernels.py [--width 320 --height 240 --repeat 3]

Each kernel runs on identical inputs under both backends; the script reports
the best wall time per backend, the speedup, and whether the outputs agree.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np
from scipy import ndimage

from vidsal.frame_io import Frame, to_lab
from vidsal.kernels import available_backends, get_backend
from vidsal.segmentation import grid_seeds


def _scene(height: int, width: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rgb = rng.random((height, width, 3)) * 255
    rgb = ndimage.gaussian_filter(rgb, (3, 3, 0))
    return np.clip(rgb, 0, 255).astype(np.uint8)


def _cases(height: int, width: int) -> dict:
    lab = to_lab(Frame(rgb=_scene(height, width), index=0, stem="0")).lab_stack()
    k = 300
    pts = grid_seeds((height, width), k)
    xi = np.clip(np.rint(pts[:, 0]).astype(int), 0, width - 1)
    yi = np.clip(np.rint(pts[:, 1]).astype(int), 0, height - 1)
    centers = np.column_stack([lab[yi, xi], pts])
    step = math.sqrt(height * width / k)

    python = get_backend("python")
    raw, _ = python.slic_iterate(lab, centers, step, 10.0, 10, 0)

    rng = np.random.default_rng(1)
    shape = (height, width)
    grads = [ndimage.gaussian_filter(rng.standard_normal(shape), 2.0) for _ in range(3)]
    zeros = np.zeros(shape)

    return {
        "slic_iterate": lambda be: be.slic_iterate(lab, centers, step, 10.0, 10, 0),
        "enforce_connectivity": lambda be: be.enforce_connectivity(raw),
        "hs_iterate": lambda be: be.hs_iterate(*grads, zeros, zeros, 225.0, 100),
    }


def _best(fn, backend, repeat: int) -> tuple[float, object]:
    best, out = math.inf, None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(backend)
        best = min(best, time.perf_counter() - start)
    return best, out


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "iub":
        return np.array_equal(a, b)
    return bool(np.allclose(a, b, rtol=1e-9, atol=1e-9))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--width", type=int, default=320)
    parser.add_argument("--height", type=int, default=240)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the python backend only")
    cases = _cases(args.height, args.width)

    print(f"frame {args.width}x{args.height}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'agree':>8}")
    for name, fn in cases.items():
        times, outs = {}, {}
        for b in backends:
            times[b], outs[b] = _best(fn, get_backend(b), args.repeat)
        row = f"{name:<22}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            speedup = times["python"] / times["compiled"]
            row += f"{speedup:>9.1f}x{str(_agree(outs['python'], outs['compiled'])):>8}"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
