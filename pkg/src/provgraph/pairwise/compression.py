"""JPEG compression evidence measured from decoded pixels.

The direction baseline rests on one observation: an image that was edited
and saved again carries the quantisation grid of both saves. Block-DCT
coefficients of a single-compressed image, divided by their quantisation
step, follow a smooth Laplacian-like histogram; after a second save with a
different step the histogram of quantisation indices develops periodic gaps
and peaks. ``dct_periodicity`` measures that comb.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .. import kernels
from ..core import ImageRecord, ProvGraphError
from ..imaging import block_dct, blockify, jpeg_roundtrip, luminance, requantize_plane
from .config import ModelConfig

MIN_SIDE = 64
DEFAULT_SWEEP = tuple(range(30, 100, 5))
# estimated_quality is reported absent when no sweep quality reproduces the
# image to within this mean absolute luma error
QUALITY_ABSENT_ERROR = 1.0

# low-frequency AC positions, zigzag order
LOW_FREQ = ((0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (3, 0), (4, 0), (3, 1), (2, 2))
STEP_MAX = 32
STEP_THRESHOLD = 0.6
STEP_MIN_COUNT = 16
HIST_HALF_WIDTH = 80
DETREND_WINDOW = 7
MIN_COMB_PERIOD = 4.0


class TooSmall(ProvGraphError):
    kind = "TooSmall"


@dataclass(frozen=True)
class CompressionProfile:
    estimated_quality: Optional[int]
    blockiness: float
    dct_periodicity: float
    residual_energy: float
    double_evidence: float


def estimate_quality(img: ImageRecord, sweep: Sequence[int] = DEFAULT_SWEEP) -> Optional[int]:
    """Sweep quality whose JPEG round trip changes the luma least."""
    y = luminance(img.pixels)
    errs = [float(np.mean(np.abs(y - luminance(jpeg_roundtrip(img.pixels, q))))) for q in sweep]
    i = int(np.argmin(errs))
    if errs[i] > QUALITY_ABSENT_ERROR:
        return None
    return int(sweep[i])


def blockiness(y: np.ndarray) -> float:
    """Mean luma step across 8-pixel grid lines minus the mean step elsewhere, floored at 0."""
    y = np.asarray(y, dtype=np.float64)
    dh = np.abs(np.diff(y, axis=1))
    dv = np.abs(np.diff(y, axis=0))
    on_h = (np.arange(dh.shape[1]) + 1) % 8 == 0
    on_v = (np.arange(dv.shape[0]) + 1) % 8 == 0
    if not on_h.any() or not on_v.any():
        return 0.0
    on = 0.5 * (dh[:, on_h].mean() + dv[on_v, :].mean())
    off = 0.5 * (dh[:, ~on_h].mean() + dv[~on_v, :].mean())
    return float(max(on - off, 0.0))


def _reduce_plane(y: np.ndarray, quality: Optional[int]) -> np.ndarray:
    q = 95 if quality is None else quality
    return kernels.deblock_median(requantize_plane(y, q, keep_dc=True))


def reduce_artifacts(img: ImageRecord, quality: Optional[int] = None, sweep: Sequence[int] = DEFAULT_SWEEP) -> ImageRecord:
    """Baseline artifact-reduction operator.

    Luma AC coefficients are re-quantised at the estimated quality, then
    pixels next to interior block boundaries get a 3x3 cross median. The
    luma change is applied equally to the three channels.
    """
    if quality is None:
        quality = estimate_quality(img, sweep)
    y = luminance(img.pixels)
    delta = _reduce_plane(y, quality) - y
    out = np.clip(np.round(img.pixels.astype(np.float64) + delta[..., None]), 0, 255).astype(np.uint8)
    return img.with_pixels(out)


@dataclass(frozen=True)
class Residual:
    values: np.ndarray  # signed luma, same shape as the image


def residual(img: ImageRecord, quality: Optional[int] = None, sweep: Sequence[int] = DEFAULT_SWEEP) -> Residual:
    """luma(I) - luma(R(I))."""
    return Residual(luminance(img.pixels) - luminance(reduce_artifacts(img, quality, sweep).pixels))


def _comb_strength(c: np.ndarray, q: int) -> float:
    k = np.round(c / q).astype(np.int64)
    half = int(min(np.abs(k).max(initial=0), HIST_HALF_WIDTH))
    if half < 4:
        return 0.0
    k = k[np.abs(k) <= half]
    h = np.bincount(k + half, minlength=2 * half + 1).astype(np.float64)
    h[half] = 0.0  # the zero bin says nothing about a second grid
    d = h - ndimage.uniform_filter1d(h, DETREND_WINDOW, mode="nearest")
    spec = np.abs(np.fft.rfft(d))[1:]
    if q == 1:
        # an unresolved step means the last save used a step too fine to
        # measure (<= 3); combs at that period are the last save itself
        period = d.size / np.arange(1, spec.size + 1)
        spec = spec[period > MIN_COMB_PERIOD]
        if spec.size == 0:
            return 0.0
    mean = spec.mean()
    if mean <= 0:
        return 0.0
    return float(spec.max() / mean)


def _periodicity_at(y: np.ndarray, dy: int, dx: int, nby: int, nbx: int) -> float:
    coefs = block_dct(blockify(y, dy, dx)[:nby, :nbx].reshape(-1, 8, 8))
    mat = np.stack([coefs[:, u, v] for u, v in LOW_FREQ], axis=1)
    steps = kernels.quant_steps(mat, STEP_MAX, STEP_THRESHOLD, STEP_MIN_COUNT)
    return float(np.mean([_comb_strength(mat[:, j], int(steps[j])) for j in range(mat.shape[1])]))


def dct_periodicity(y: np.ndarray, offset_search: bool = False) -> float:
    """Comb strength of quantisation-index histograms averaged over the
    low-frequency positions.

    By default only the grid aligned with the pixels is scored: the last save
    always quantises there, and maximising over shifted grids mostly inflates
    the noise floor of single-save images. ``offset_search`` takes the maximum
    over all 64 offsets instead, for content whose grid may have moved.
    """
    y = np.asarray(y, dtype=np.float64) - 128.0
    if not offset_search:
        nby, nbx = y.shape[0] // 8, y.shape[1] // 8
        if nby < 1 or nbx < 1:
            return 0.0
        return _periodicity_at(y, 0, 0, nby, nbx)
    nby, nbx = (y.shape[0] - 7) // 8, (y.shape[1] - 7) // 8
    if nby < 1 or nbx < 1:
        return 0.0
    return max(_periodicity_at(y, dy, dx, nby, nbx) for dy in range(8) for dx in range(8))


def residual_energy(y: np.ndarray, r: np.ndarray) -> float:
    """High-pass energy of the residual relative to that of the image."""
    hr = r - ndimage.gaussian_filter(r, 1.0, mode="nearest")
    hy = y - ndimage.gaussian_filter(y, 1.0, mode="nearest")
    return float(np.mean(hr * hr) / (np.mean(hy * hy) + 1e-6))


def compression_profile(img: ImageRecord, cfg: ModelConfig = ModelConfig()) -> CompressionProfile:
    if img.width < MIN_SIDE or img.height < MIN_SIDE:
        raise TooSmall(f"compression profile needs at least {MIN_SIDE}x{MIN_SIDE}, got {img.width}x{img.height}")
    sweep = cfg.quality_sweep
    q = estimate_quality(img, sweep)
    y = luminance(img.pixels)
    r = y - luminance(reduce_artifacts(img, q, sweep).pixels)
    period = dct_periodicity(y, cfg.offset_search)
    energy = residual_energy(y, r)
    evidence = cfg.w_periodicity * period + cfg.w_residual * energy
    return CompressionProfile(q, blockiness(y), period, energy, float(evidence))
