# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, M_PI, INFINITY

cnp.import_array()


def ratio_match(da, db, double ratio):
    cdef double[:, ::1] a = np.ascontiguousarray(da, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(db, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], dim = a.shape[1]
    cdef Py_ssize_t i, j, k, jbest, cnt = 0
    cdef double d, t, d1, d2
    if n == 0 or m < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64)
    out_a = np.empty(n, np.int64)
    out_b = np.empty(n, np.int64)
    out_d = np.empty(n, np.float64)
    cdef cnp.int64_t[::1] oa = out_a
    cdef cnp.int64_t[::1] ob = out_b
    cdef double[::1] od = out_d
    for i in range(n):
        d1 = INFINITY
        d2 = INFINITY
        jbest = -1
        for j in range(m):
            d = 0.0
            for k in range(dim):
                t = a[i, k] - b[j, k]
                d += t * t
            if d < d1:
                d2 = d1
                d1 = d
                jbest = j
            elif d < d2:
                d2 = d
        d1 = sqrt(d1)
        d2 = sqrt(d2)
        if d1 < ratio * d2:
            oa[cnt] = i
            ob[cnt] = jbest
            od[cnt] = d1
            cnt += 1
    return out_a[:cnt].copy(), out_b[:cnt].copy(), out_d[:cnt].copy()


def ransac_similarity(src, dst, samples, double tol, double min_scale, double max_scale):
    cdef double[:, ::1] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(dst, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] smp = np.ascontiguousarray(samples, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], iters = smp.shape[0]
    cdef Py_ssize_t h, k, i, j
    cdef int count, best_count = 0
    cdef double sx, sy, tx, ty, den, are, aim, bre, bim, scale, rx, ry
    cdef double tol2 = tol * tol
    best = np.zeros(4)
    if n < 2 or iters == 0:
        return 0, best
    for h in range(iters):
        i = smp[h, 0]
        j = smp[h, 1]
        sx = s[j, 0] - s[i, 0]
        sy = s[j, 1] - s[i, 1]
        den = sx * sx + sy * sy
        if sqrt(den) <= 1e-9:
            continue
        tx = t[j, 0] - t[i, 0]
        ty = t[j, 1] - t[i, 1]
        # a = (tx + i ty) / (sx + i sy)
        are = (tx * sx + ty * sy) / den
        aim = (ty * sx - tx * sy) / den
        scale = sqrt(are * are + aim * aim)
        if scale < min_scale or scale > max_scale:
            continue
        bre = t[i, 0] - (are * s[i, 0] - aim * s[i, 1])
        bim = t[i, 1] - (are * s[i, 1] + aim * s[i, 0])
        count = 0
        for k in range(n):
            rx = are * s[k, 0] - aim * s[k, 1] + bre - t[k, 0]
            ry = are * s[k, 1] + aim * s[k, 0] + bim - t[k, 1]
            if rx * rx + ry * ry <= tol2:
                count += 1
        if count > best_count:
            best_count = count
            best[0] = are
            best[1] = aim
            best[2] = bre
            best[3] = bim
    return best_count, best


cdef inline double _med5(double a, double b, double c, double d, double e) nogil:
    cdef double v[5]
    cdef int i, j
    cdef double x
    v[0] = a; v[1] = b; v[2] = c; v[3] = d; v[4] = e
    for i in range(1, 5):
        x = v[i]
        j = i - 1
        while j >= 0 and v[j] > x:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = x
    return v[2]


def deblock_median(plane):
    cdef double[:, ::1] p = np.ascontiguousarray(plane, dtype=np.float64)
    cdef Py_ssize_t h = p.shape[0], w = p.shape[1]
    out_arr = np.array(p, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, ym, yp, xm, xp
    cdef bint rowb, colb
    for y in range(h):
        rowb = ((y % 8 == 7) and (y + 1 < h)) or ((y % 8 == 0) and (y > 0))
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y + 1 < h else h - 1
        for x in range(w):
            colb = ((x % 8 == 7) and (x + 1 < w)) or ((x % 8 == 0) and (x > 0))
            if not (rowb or colb):
                continue
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x + 1 < w else w - 1
            out[y, x] = _med5(p[y, x], p[ym, x], p[yp, x], p[y, xm], p[y, xp])
    return out_arr


def quant_steps(coefs, int qmax, double threshold, Py_ssize_t min_count):
    cdef double[:, :] c = np.asarray(coefs, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1]
    cdef Py_ssize_t col, i, cnt
    cdef int q
    cdef double s, x, half, w
    out = np.ones(m, dtype=np.int64)
    cdef cnp.int64_t[::1] best = out
    for col in range(m):
        for q in range(qmax, 1, -1):
            half = q / 2.0 - 0.5
            w = 2.0 * M_PI / q
            cnt = 0
            s = 0.0
            for i in range(n):
                x = c[i, col]
                if x >= half or x <= -half:
                    s += cos(w * x)
                    cnt += 1
            if cnt >= min_count and s >= threshold * cnt:
                best[col] = q
                break
    return out
