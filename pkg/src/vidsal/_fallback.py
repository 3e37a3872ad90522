"""Pure NumPy/SciPy implementations of the hot kernels.

These define the reference semantics; the compiled ``_kernels`` module must
produce identical label maps and numerically equal flow fields.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

_FOUR = ndimage.generate_binary_structure(2, 1)


def _window(c: float, radius: float, n: int) -> tuple[int, int]:
    lo = max(0, int(math.floor(c - radius)))
    hi = min(n, int(math.floor(c + radius)) + 1)
    return lo, hi


def slic_iterate(lab, centers, step, compactness, n_iter, max_iter=0):
    """SLIC assign/update rounds.

    ``lab`` is H x W x 3 float64, ``centers`` K x 5 float64 rows of
    (L, a, b, x, y). At least ``n_iter`` rounds run; after that iteration
    continues, up to ``max_iter`` rounds in total, until an assignment
    repeats the previous one. Returns (labels int32 H x W, centers).
    Pixels outside every search window are given to the globally nearest
    center. Ties go to the lowest center index.
    """
    lab = np.ascontiguousarray(lab, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64, copy=True)
    h, w = lab.shape[:2]
    k = centers.shape[0]
    wxy = (compactness / step) ** 2
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    labels = np.full((h, w), -1, dtype=np.int32)
    rounds = max(1, n_iter, max_iter)

    for it in range(rounds):
        previous = labels.copy()
        dist = np.full((h, w), np.inf)
        labels.fill(-1)
        for c in range(k):
            cl, ca, cb, cx, cy = centers[c]
            x0, x1 = _window(cx, step, w)
            y0, y1 = _window(cy, step, h)
            if x0 >= x1 or y0 >= y1:
                continue
            sub = lab[y0:y1, x0:x1]
            dl = sub[..., 0] - cl
            da = sub[..., 1] - ca
            db = sub[..., 2] - cb
            dx = xs[y0:y1, x0:x1] - cx
            dy = ys[y0:y1, x0:x1] - cy
            d = (dl * dl + da * da + db * db) + (dx * dx + dy * dy) * wxy
            better = d < dist[y0:y1, x0:x1]
            dist[y0:y1, x0:x1][better] = d[better]
            labels[y0:y1, x0:x1][better] = c
        if it >= n_iter and it > 0 and np.array_equal(labels, previous):
            break
        centers = _update_centers(lab, xs, ys, labels, centers)

    missing = labels < 0
    if missing.any():
        _assign_global(lab, xs, ys, labels, centers, wxy, missing)
    return labels, centers


def _update_centers(lab, xs, ys, labels, centers):
    k = centers.shape[0]
    flat = labels.ravel()
    ok = flat >= 0
    idx = flat[ok]
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    out = centers.copy()
    feats = (lab[..., 0], lab[..., 1], lab[..., 2], xs, ys)
    nz = counts > 0
    for j, f in enumerate(feats):
        sums = np.bincount(idx, weights=f.ravel()[ok], minlength=k)
        out[nz, j] = sums[nz] / counts[nz]
    return out


def _assign_global(lab, xs, ys, labels, centers, wxy, missing):
    pl = lab[missing]
    px = xs[missing]
    py = ys[missing]
    best = np.full(pl.shape[0], np.inf)
    arg = np.zeros(pl.shape[0], dtype=np.int32)
    for c in range(centers.shape[0]):
        cl, ca, cb, cx, cy = centers[c]
        dl = pl[:, 0] - cl
        da = pl[:, 1] - ca
        db = pl[:, 2] - cb
        dx = px - cx
        dy = py - cy
        d = (dl * dl + da * da + db * db) + (dx * dx + dy * dy) * wxy
        better = d < best
        best[better] = d[better]
        arg[better] = c
    labels[missing] = arg


def _components(labels):
    """4-connected components, numbered in raster order of their first pixel."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    firsts = []
    owner = []
    blocks = []
    for lab_id in np.unique(labels):
        cc, n = ndimage.label(labels == lab_id, structure=_FOUR)
        if n == 0:
            continue
        flat = cc.ravel()
        pos = np.flatnonzero(flat)
        first = np.full(n + 1, h * w, dtype=np.int64)
        np.minimum.at(first, flat[pos], pos)
        blocks.append((cc, n, len(firsts)))
        firsts.extend(first[1:].tolist())
        owner.extend([int(lab_id)] * n)
    order = np.argsort(np.asarray(firsts), kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    for cc, n, base in blocks:
        m = cc > 0
        comp[m] = rank[base + cc[m] - 1]
    owner = np.asarray(owner, dtype=np.int64)[order]
    return comp, owner


def enforce_connectivity(labels, components=None):
    """Merge orphan fragments so every label is one 4-connected region.

    Each label keeps its largest component (earliest in raster order on
    ties). Remaining fragments, visited in raster order, join the adjacent
    group with the most pixels (lowest component id on ties). Returns
    ``(labels, kept)`` where ``labels`` is densely renumbered and ``kept``
    lists, per new id, the original label it came from.
    """
    labels = np.asarray(labels, dtype=np.int32)
    comp, owner = (components or _components)(labels)
    ncomp = owner.size
    sizes = np.bincount(comp.ravel(), minlength=ncomp).astype(np.int64)

    keeper = {}
    for c in range(ncomp):
        o = int(owner[c])
        if o not in keeper or sizes[c] > sizes[keeper[o]]:
            keeper[o] = c
    is_kept = np.zeros(ncomp, dtype=bool)
    is_kept[list(keeper.values())] = True

    pairs = set()
    a = comp[:, :-1].ravel()
    b = comp[:, 1:].ravel()
    d = a != b
    pairs.update(zip(a[d].tolist(), b[d].tolist()))
    a = comp[:-1, :].ravel()
    b = comp[1:, :].ravel()
    d = a != b
    pairs.update(zip(a[d].tolist(), b[d].tolist()))
    nbrs = [[] for _ in range(ncomp)]
    for p, q in pairs:
        nbrs[p].append(q)
        nbrs[q].append(p)

    parent = list(range(ncomp))
    setsize = sizes.tolist()

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in range(ncomp):
        if is_kept[c]:
            continue
        rc = find(c)
        best = -1
        best_size = -1
        for q in sorted(nbrs[c]):
            rq = find(q)
            if rq == rc:
                continue
            if setsize[rq] > best_size:
                best, best_size = rq, setsize[rq]
        if best < 0:
            continue
        parent[rc] = best
        setsize[best] += setsize[rc]

    root_label = np.empty(ncomp, dtype=np.int64)
    for c in range(ncomp):
        root_label[c] = int(owner[c]) if is_kept[c] else -1
    comp_label = np.empty(ncomp, dtype=np.int64)
    next_fresh = int(labels.max()) + 1
    fresh = {}
    for c in range(ncomp):
        r = find(c)
        if is_kept[r]:
            comp_label[c] = root_label[r]
        else:
            # orphan-only group with no way out; give it its own label
            if r not in fresh:
                fresh[r] = next_fresh
                next_fresh += 1
            comp_label[c] = fresh[r]
    merged = comp_label[comp]
    kept, dense = np.unique(merged, return_inverse=True)
    return dense.reshape(labels.shape).astype(np.int32), kept.astype(np.int64)


def hs_iterate(ix, iy, it, u0, v0, alpha2, n_iter):
    """Horn-Schunck Jacobi sweeps linearized about (u0, v0).

    Solves for the total flow (u, v) with data term
    ``ix*(u-u0) + iy*(v-v0) + it = 0`` and the classic 3x3 averaging
    stencil (edge-replicated).
    """
    u = np.array(u0, dtype=np.float64, copy=True)
    v = np.array(v0, dtype=np.float64, copy=True)
    denom = alpha2 + ix * ix + iy * iy
    for _ in range(n_iter):
        ub = _hs_average(u)
        vb = _hs_average(v)
        t = (ix * (ub - u0) + iy * (vb - v0) + it) / denom
        u = ub - ix * t
        v = vb - iy * t
    return u, v


def _hs_average(f):
    p = np.pad(f, 1, mode="edge")
    side = (p[:-2, 1:-1] + p[2:, 1:-1]) + (p[1:-1, :-2] + p[1:-1, 2:])
    diag = (p[:-2, :-2] + p[:-2, 2:]) + (p[2:, :-2] + p[2:, 2:])
    return side / 6.0 + diag / 12.0
