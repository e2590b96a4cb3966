"""Global descriptors (fixed 256-d layout) and corner-based local features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import ImageRecord
from .imaging import luminance

DIM = 256
LAYOUT_VERSION = 1  # bump when the component layout of the global descriptor changes
EPS = 1e-12
N_ORIENT = 6
GRID = 4
THUMB = 8

LOCAL_DIM = 32
MAX_FEATURES = 512
N_OCTAVES = 3
PATCH_RADIUS = 8  # 16x16 support, 4x4 subcells of 4x4 pixels
HARRIS_K = 0.04
HARRIS_REL_THRESHOLD = 0.001
HARRIS_ABS_THRESHOLD = 1e-7


class DimensionMismatch(ValueError):
    kind = "DimensionMismatch"


@dataclass(frozen=True)
class GlobalDescriptor:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class LocalFeatureSet:
    xy: np.ndarray  # (n, 2) normalised positions in [0, 1]
    scale: np.ndarray  # (n,)
    descriptors: np.ndarray  # (n, 32), unit rows
    response: np.ndarray  # (n,)

    def __len__(self) -> int:
        return self.xy.shape[0]


def _cell_edges(n: int, cells: int) -> np.ndarray:
    return np.linspace(0, n, cells + 1).round().astype(int)


def _cell_reduce(a: np.ndarray, cells: int, fn=np.mean) -> np.ndarray:
    """Reduce each of ``cells x cells`` regions of the first two axes."""
    ys = _cell_edges(a.shape[0], cells)
    xs = _cell_edges(a.shape[1], cells)
    out = []
    for i in range(cells):
        for j in range(cells):
            region = a[ys[i] : max(ys[i + 1], ys[i] + 1), xs[j] : max(xs[j + 1], xs[j] + 1)]
            out.append(fn(region.reshape(-1, *a.shape[2:]), axis=0))
    return np.asarray(out)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / (np.linalg.norm(v) + EPS)


def extract_global(img: ImageRecord) -> GlobalDescriptor:
    """256-d descriptor: 4x4 gradient-orientation histograms (96), 4x4 RGB
    mean and std (96) and a mean-subtracted 8x8 luminance thumbnail (64).

    Each block is centred and unit-normalised before the final
    normalisation so that no block dominates the cosine.
    """
    px = img.pixels.astype(np.float64) / 255.0
    y = luminance(img.pixels) / 255.0

    gy, gx = np.gradient(y)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((ang / np.pi * N_ORIENT).astype(int), N_ORIENT - 1)
    onehot = np.zeros(y.shape + (N_ORIENT,))
    np.put_along_axis(onehot, bins[..., None], mag[..., None], axis=-1)
    hist = _cell_reduce(onehot, GRID, np.sum).reshape(-1)
    hist = hist / (hist.sum() + EPS)
    hist = np.sqrt(hist)
    grad_block = hist - hist.mean() if hist.any() else hist

    means = _cell_reduce(px, GRID, np.mean)
    stds = _cell_reduce(px, GRID, np.std)
    color_block = np.concatenate([means - 0.5, stds], axis=1).reshape(-1)

    thumb = _cell_reduce(y, THUMB, np.mean).reshape(-1)
    thumb_block = thumb - thumb.mean()

    v = np.concatenate([_unit(grad_block), _unit(color_block), _unit(thumb_block)])
    return GlobalDescriptor(_unit(v))


def similarity(a: GlobalDescriptor, b: GlobalDescriptor) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"descriptor dimensions differ: {a.dim} vs {b.dim}")
    return float(np.clip(np.dot(a.vector, b.vector), -1.0, 1.0))


def _downsample(plane: np.ndarray) -> np.ndarray:
    sm = ndimage.gaussian_filter(plane, 1.0, mode="nearest")
    h, w = (sm.shape[0] // 2) * 2, (sm.shape[1] // 2) * 2
    return sm[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _harris(plane: np.ndarray):
    gx = ndimage.sobel(plane, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(plane, axis=0, mode="nearest") / 8.0
    sxx = ndimage.gaussian_filter(gx * gx, 1.5, mode="nearest")
    syy = ndimage.gaussian_filter(gy * gy, 1.5, mode="nearest")
    sxy = ndimage.gaussian_filter(gx * gy, 1.5, mode="nearest")
    resp = sxx * syy - sxy * sxy - HARRIS_K * (sxx + syy) ** 2
    return resp, gx, gy


_WEIGHT = np.exp(-((np.arange(2 * PATCH_RADIUS) - PATCH_RADIUS + 0.5) ** 2) / (2 * (PATCH_RADIUS * 0.75) ** 2))
_OFFS = np.arange(2 * PATCH_RADIUS) - PATCH_RADIUS + 0.5
# rotated 16x16 sampling grid reaches 8 * sqrt(2) from the keypoint
BORDER = int(np.ceil(PATCH_RADIUS * np.sqrt(2))) + 2
ORIENT_BINS = 36
ORIENT_RADIUS = 6
ORIENT_SIGMA = 3.0


def _orientations(gx: np.ndarray, gy: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Dominant gradient direction around each keypoint (radians), from a
    Gaussian-weighted 36-bin histogram with parabolic peak refinement."""
    off = np.arange(-ORIENT_RADIUS, ORIENT_RADIUS + 1)
    rr = ys[:, None, None] + off[None, :, None]
    cc = xs[:, None, None] + off[None, None, :]
    g = np.exp(-(off[:, None] ** 2 + off[None, :] ** 2) / (2 * ORIENT_SIGMA**2))
    g = np.where(off[:, None] ** 2 + off[None, :] ** 2 <= ORIENT_RADIUS**2, g, 0.0)
    px, py = gx[rr, cc], gy[rr, cc]
    mag = np.hypot(px, py) * g
    ang = np.arctan2(py, px)
    b = np.floor((ang + np.pi) / (2 * np.pi) * ORIENT_BINS).astype(np.int64) % ORIENT_BINS
    n = ys.shape[0]
    hist = np.zeros((n, ORIENT_BINS))
    np.add.at(hist, (np.repeat(np.arange(n), mag[0].size), b.reshape(-1)), mag.reshape(-1))
    hist = ndimage.convolve1d(hist, np.array([1.0, 2.0, 1.0]) / 4.0, axis=1, mode="wrap")
    k = np.argmax(hist, axis=1)
    r = np.arange(n)
    left, mid, right = hist[r, (k - 1) % ORIENT_BINS], hist[r, k], hist[r, (k + 1) % ORIENT_BINS]
    den = left - 2 * mid + right
    shift = np.where(np.abs(den) > 1e-12, 0.5 * (left - right) / np.where(den == 0, 1, den), 0.0)
    return (k + 0.5 + shift) * (2 * np.pi / ORIENT_BINS) - np.pi


def _describe(gx: np.ndarray, gy: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Gradient sums over 4x4 subcells of a 16x16 patch rotated to the dominant direction."""
    theta = _orientations(gx, gy, ys, xs)
    c, s = np.cos(theta)[:, None, None], np.sin(theta)[:, None, None]
    u, v = _OFFS[None, None, :], _OFFS[None, :, None]  # u along columns, v along rows
    X = xs[:, None, None] + c * u - s * v
    Y = ys[:, None, None] + s * u + c * v
    coords = np.stack([Y.reshape(-1), X.reshape(-1)])
    sx = ndimage.map_coordinates(gx, coords, order=1, mode="nearest").reshape(X.shape)
    sy = ndimage.map_coordinates(gy, coords, order=1, mode="nearest").reshape(X.shape)
    wgt = _WEIGHT[:, None] * _WEIGHT[None, :]
    pu = (c * sx + s * sy) * wgt
    pv = (-s * sx + c * sy) * wgt
    n = ys.shape[0]
    # sum over 4x4 pixel subcells -> (n, 4, 4)
    su = pu.reshape(n, 4, 4, 4, 4).sum(axis=(2, 4))
    sv = pv.reshape(n, 4, 4, 4, 4).sum(axis=(2, 4))
    return np.stack([su, sv], axis=-1).reshape(n, LOCAL_DIM)


def extract_local(img: ImageRecord, max_features: int = MAX_FEATURES) -> LocalFeatureSet:
    """Harris corners on a 3-octave luminance pyramid with orientation-normalised
    4x4x2 gradient-sum descriptors."""
    y = luminance(img.pixels) / 255.0
    H, W = y.shape
    xy, scales, descs, resps, order_keys = [], [], [], [], []
    plane = y
    peak = None
    responses = []
    for octave in range(N_OCTAVES):
        if octave:
            plane = _downsample(plane)
        if min(plane.shape) < 2 * BORDER + 2:
            break
        resp, gx, gy = _harris(plane)
        responses.append((octave, resp, gx, gy))
        m = float(resp.max())
        peak = m if peak is None else max(peak, m)
    if not responses or peak is None or peak <= 0:
        return _empty_features()
    thresh = max(HARRIS_REL_THRESHOLD * peak, HARRIS_ABS_THRESHOLD)
    for octave, resp, gx, gy in responses:
        local_max = ndimage.maximum_filter(resp, size=3, mode="nearest")
        cand = (resp == local_max) & (resp > thresh)
        m = BORDER
        cand[:m, :] = False
        cand[-m:, :] = False
        cand[:, :m] = False
        cand[:, -m:] = False
        ys, xs = np.nonzero(cand)
        if ys.size == 0:
            continue
        d = _describe(gx, gy, ys, xs)
        norms = np.linalg.norm(d, axis=1)
        ok = norms > 1e-9
        ys, xs, d, norms = ys[ok], xs[ok], d[ok], norms[ok]
        f = float(2**octave)
        xy.append(np.stack([(xs + 0.5) * f / W, (ys + 0.5) * f / H], axis=1))
        scales.append(np.full(ys.shape[0], f))
        descs.append(d / norms[:, None])
        resps.append(resp[ys, xs])
        order_keys.append(np.stack([np.full(ys.shape[0], octave), ys, xs], axis=1))
    if not xy:
        return _empty_features()
    xy_a = np.clip(np.concatenate(xy), 0.0, 1.0)
    sc = np.concatenate(scales)
    de = np.concatenate(descs)
    rs = np.concatenate(resps)
    keys = np.concatenate(order_keys)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0], -rs))[:max_features]
    return LocalFeatureSet(xy_a[order], sc[order], de[order], rs[order])


def _empty_features() -> LocalFeatureSet:
    return LocalFeatureSet(np.zeros((0, 2)), np.zeros(0), np.zeros((0, LOCAL_DIM)), np.zeros(0))
