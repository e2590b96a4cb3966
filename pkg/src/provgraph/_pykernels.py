"""Numpy implementations of the hot kernels. Same signatures as ``_ckernels``."""

from __future__ import annotations

import numpy as np

_CHUNK = 128


def ratio_match(da: np.ndarray, db: np.ndarray, ratio: float):
    """Nearest neighbour of each row of ``da`` in ``db`` with Lowe's distance-ratio test.

    Returns (idx_a, idx_b, dist) for accepted matches, in ascending ``idx_a``.
    Needs at least two rows in ``db``.
    """
    da = np.ascontiguousarray(da, dtype=np.float64)
    db = np.ascontiguousarray(db, dtype=np.float64)
    n, m = da.shape[0], db.shape[0]
    if n == 0 or m < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64)
    best = np.empty(n, np.int64)
    d1 = np.empty(n)
    d2 = np.empty(n)
    rows = np.arange(_CHUNK)
    for s in range(0, n, _CHUNK):
        a = da[s : s + _CHUNK]
        r = rows[: a.shape[0]]
        diff = a[:, None, :] - db[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        j = np.argmin(dist, axis=1)
        best[s : s + a.shape[0]] = j
        d1[s : s + a.shape[0]] = dist[r, j]
        dist[r, j] = np.inf
        d2[s : s + a.shape[0]] = dist.min(axis=1)
    d1 = np.sqrt(d1)
    d2 = np.sqrt(d2)
    keep = d1 < ratio * d2
    idx = np.nonzero(keep)[0].astype(np.int64)
    return idx, best[keep].astype(np.int64), d1[keep]


def ransac_similarity(src: np.ndarray, dst: np.ndarray, samples: np.ndarray, tol: float,
                      min_scale: float, max_scale: float):
    """Score 4-DOF similarity hypotheses from index pairs ``samples``.

    Returns (best_inlier_count, model) where model = (a_re, a_im, b_re, b_im)
    for the map z -> a*z + b on points-as-complex-numbers. The first
    hypothesis reaching the maximum count wins.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.int64)
    best_count = 0
    best_model = np.zeros(4)
    if src.shape[0] < 2 or samples.shape[0] == 0:
        return best_count, best_model
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    i, j = samples[:, 0], samples[:, 1]
    ds = zs[j] - zs[i]
    ok = np.abs(ds) > 1e-9
    a = np.where(ok, (zd[j] - zd[i]) / np.where(ok, ds, 1.0), 0.0)
    scale = np.abs(a)
    ok &= (scale >= min_scale) & (scale <= max_scale)
    b = zd[i] - a * zs[i]
    tol2 = tol * tol
    for h0 in range(0, samples.shape[0], _CHUNK):
        ah = a[h0 : h0 + _CHUNK, None]
        bh = b[h0 : h0 + _CHUNK, None]
        r = ah * zs[None, :] + bh - zd[None, :]
        counts = np.count_nonzero(r.real * r.real + r.imag * r.imag <= tol2, axis=1)
        counts[~ok[h0 : h0 + _CHUNK]] = 0
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_model = np.array([a[h0 + k].real, a[h0 + k].imag, b[h0 + k].real, b[h0 + k].imag])
    return best_count, best_model


def deblock_median(plane: np.ndarray) -> np.ndarray:
    """Replace pixels adjacent to interior 8-pixel block boundaries by the
    median of their 3x3 cross (centre + 4-neighbours, edges clamped)."""
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape
    pad = np.pad(p, 1, mode="edge")
    stack = np.stack(
        [pad[1:-1, 1:-1], pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:]]
    )
    med = np.median(stack, axis=0)
    mask = np.zeros((h, w), dtype=bool)
    cols = np.arange(w)
    rows = np.arange(h)
    colmask = ((cols % 8 == 7) & (cols + 1 < w)) | ((cols % 8 == 0) & (cols > 0))
    rowmask = ((rows % 8 == 7) & (rows + 1 < h)) | ((rows % 8 == 0) & (rows > 0))
    mask[:, colmask] = True
    mask[rowmask, :] = True
    return np.where(mask, med, p)


def quant_steps(coefs: np.ndarray, qmax: int, threshold: float, min_count: int) -> np.ndarray:
    """Largest quantisation step q in [2, qmax] each column of ``coefs`` is consistent with, else 1.

    A column is consistent with q when, over its values with |c| >= q/2 - 0.5
    (at least ``min_count`` of them), the mean of cos(2 pi c / q) reaches
    ``threshold``. Exact multiples of q score 1, unquantised data about 0.
    """
    c = np.asarray(coefs, dtype=np.float64)
    m = c.shape[1]
    best = np.ones(m, dtype=np.int64)
    a = np.abs(c)
    for q in range(2, qmax + 1):
        sel = a >= q / 2.0 - 0.5
        cnt = sel.sum(axis=0)
        s = np.where(sel, np.cos(2.0 * np.pi * c / q), 0.0).sum(axis=0)
        ok = (cnt >= min_count) & (s >= threshold * np.maximum(cnt, 1))
        best[ok] = q
    return best
