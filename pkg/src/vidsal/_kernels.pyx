# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the SLIC, component-labeling and Horn-Schunck kernels.

Semantics mirror ``vidsal._fallback`` exactly; see that module for the
documentation of each routine.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


cdef inline void _window(double c, double radius, Py_ssize_t n,
                         Py_ssize_t *lo, Py_ssize_t *hi) noexcept nogil:
    cdef Py_ssize_t a = <Py_ssize_t>floor(c - radius)
    cdef Py_ssize_t b = <Py_ssize_t>floor(c + radius) + 1
    lo[0] = a if a > 0 else 0
    hi[0] = b if b < n else n


def slic_iterate(lab, centers, double step, double compactness, int n_iter, int max_iter=0):
    cdef double[:, :, ::1] L = np.ascontiguousarray(lab, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cen_arr = np.array(centers, dtype=np.float64, copy=True)
    cdef double[:, ::1] C = cen_arr
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], k = C.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] lab_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] labels = lab_arr
    cdef double[:, ::1] dist = np.empty((h, w), dtype=np.float64)
    cdef int[:, ::1] prev = np.empty((h, w), dtype=np.int32)
    cdef double[:, ::1] sums = np.zeros((k, 5), dtype=np.float64)
    cdef double[::1] counts = np.zeros(k, dtype=np.float64)
    cdef double wxy = (compactness / step) * (compactness / step)
    cdef Py_ssize_t it, c, x, y, x0, x1, y0, y1, j
    cdef double cl, ca, cb, cx, cy, dl, da, db, dx, dy, d, best
    cdef int lbl, arg
    cdef int rounds = n_iter if n_iter > 1 else 1
    cdef bint changed
    if max_iter > rounds:
        rounds = max_iter

    with nogil:
        for it in range(rounds):
            for y in range(h):
                for x in range(w):
                    dist[y, x] = INFINITY
                    prev[y, x] = labels[y, x]
                    labels[y, x] = -1
            for c in range(k):
                cl = C[c, 0]; ca = C[c, 1]; cb = C[c, 2]; cx = C[c, 3]; cy = C[c, 4]
                _window(cx, step, w, &x0, &x1)
                _window(cy, step, h, &y0, &y1)
                for y in range(y0, y1):
                    dy = <double>y - cy
                    for x in range(x0, x1):
                        dl = L[y, x, 0] - cl
                        da = L[y, x, 1] - ca
                        db = L[y, x, 2] - cb
                        dx = <double>x - cx
                        d = (dl * dl + da * da + db * db) + (dx * dx + dy * dy) * wxy
                        if d < dist[y, x]:
                            dist[y, x] = d
                            labels[y, x] = <int>c
            if it >= n_iter and it > 0:
                changed = False
                for y in range(h):
                    for x in range(w):
                        if labels[y, x] != prev[y, x]:
                            changed = True
                            break
                    if changed:
                        break
                if not changed:
                    break
            # center update, raster-order sums
            for c in range(k):
                counts[c] = 0.0
                for j in range(5):
                    sums[c, j] = 0.0
            for y in range(h):
                for x in range(w):
                    lbl = labels[y, x]
                    if lbl >= 0:
                        counts[lbl] += 1.0
                        sums[lbl, 0] += L[y, x, 0]
                        sums[lbl, 1] += L[y, x, 1]
                        sums[lbl, 2] += L[y, x, 2]
                        sums[lbl, 3] += <double>x
                        sums[lbl, 4] += <double>y
            for c in range(k):
                if counts[c] > 0:
                    for j in range(5):
                        C[c, j] = sums[c, j] / counts[c]

        for y in range(h):
            for x in range(w):
                if labels[y, x] >= 0:
                    continue
                best = INFINITY
                arg = 0
                for c in range(k):
                    dl = L[y, x, 0] - C[c, 0]
                    da = L[y, x, 1] - C[c, 1]
                    db = L[y, x, 2] - C[c, 2]
                    dx = <double>x - C[c, 3]
                    dy = <double>y - C[c, 4]
                    d = (dl * dl + da * da + db * db) + (dx * dx + dy * dy) * wxy
                    if d < best:
                        best = d
                        arg = <int>c
                labels[y, x] = arg
    return lab_arr, cen_arr


def components(labels_in):
    cdef int[:, ::1] labels = np.ascontiguousarray(labels_in, dtype=np.int32)
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] comp_arr = np.full((h, w), -1, dtype=np.int64)
    cdef long long[:, ::1] comp = comp_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] stack_arr = np.empty(h * w, dtype=np.int64)
    cdef long long[::1] stack = stack_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] owner_arr = np.empty(h * w, dtype=np.int64)
    cdef long long[::1] owner = owner_arr
    cdef long long ncomp = 0, top, p
    cdef Py_ssize_t x, y, px, py
    cdef int lbl

    with nogil:
        for y in range(h):
            for x in range(w):
                if comp[y, x] >= 0:
                    continue
                lbl = labels[y, x]
                owner[ncomp] = lbl
                comp[y, x] = ncomp
                top = 0
                stack[top] = y * w + x
                top += 1
                while top > 0:
                    top -= 1
                    p = stack[top]
                    py = p // w
                    px = p - py * w
                    if px > 0 and comp[py, px - 1] < 0 and labels[py, px - 1] == lbl:
                        comp[py, px - 1] = ncomp
                        stack[top] = p - 1
                        top += 1
                    if px < w - 1 and comp[py, px + 1] < 0 and labels[py, px + 1] == lbl:
                        comp[py, px + 1] = ncomp
                        stack[top] = p + 1
                        top += 1
                    if py > 0 and comp[py - 1, px] < 0 and labels[py - 1, px] == lbl:
                        comp[py - 1, px] = ncomp
                        stack[top] = p - w
                        top += 1
                    if py < h - 1 and comp[py + 1, px] < 0 and labels[py + 1, px] == lbl:
                        comp[py + 1, px] = ncomp
                        stack[top] = p + w
                        top += 1
                ncomp += 1
    return comp_arr, owner_arr[:ncomp].copy()


def hs_iterate(ix_in, iy_in, it_in, u0_in, v0_in, double alpha2, int n_iter):
    cdef double[:, ::1] ix = np.ascontiguousarray(ix_in, dtype=np.float64)
    cdef double[:, ::1] iy = np.ascontiguousarray(iy_in, dtype=np.float64)
    cdef double[:, ::1] itm = np.ascontiguousarray(it_in, dtype=np.float64)
    cdef double[:, ::1] u0 = np.ascontiguousarray(u0_in, dtype=np.float64)
    cdef double[:, ::1] v0 = np.ascontiguousarray(v0_in, dtype=np.float64)
    cdef Py_ssize_t h = ix.shape[0], w = ix.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_arr = np.array(u0_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.array(v0_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] un_arr = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] vn_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] un = un_arr
    cdef double[:, ::1] vn = vn_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t n, x, y, xm, xp, ym, yp
    cdef double ub, vb, t, side, diag, den

    with nogil:
        for n in range(n_iter):
            for y in range(h):
                ym = y - 1 if y > 0 else 0
                yp = y + 1 if y < h - 1 else h - 1
                for x in range(w):
                    xm = x - 1 if x > 0 else 0
                    xp = x + 1 if x < w - 1 else w - 1
                    side = (u[ym, x] + u[yp, x]) + (u[y, xm] + u[y, xp])
                    diag = (u[ym, xm] + u[ym, xp]) + (u[yp, xm] + u[yp, xp])
                    ub = side / 6.0 + diag / 12.0
                    side = (v[ym, x] + v[yp, x]) + (v[y, xm] + v[y, xp])
                    diag = (v[ym, xm] + v[ym, xp]) + (v[yp, xm] + v[yp, xp])
                    vb = side / 6.0 + diag / 12.0
                    den = alpha2 + ix[y, x] * ix[y, x] + iy[y, x] * iy[y, x]
                    t = (ix[y, x] * (ub - u0[y, x]) + iy[y, x] * (vb - v0[y, x]) + itm[y, x]) / den
                    un[y, x] = ub - ix[y, x] * t
                    vn[y, x] = vb - iy[y, x] * t
            tmp = u; u = un; un = tmp
            tmp = v; v = vn; vn = tmp
    return np.asarray(u).copy(), np.asarray(v).copy()
