"""Pixel-level helpers: decoding, JPEG round trips, luminance and 8x8 block DCT."""

from __future__ import annotations

import io
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageFormat, ImageId, ImageRecord

# Annex K luminance table, zigzag not applied (row-major u,v).
JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

_FORMATS = {"JPEG": ImageFormat.JPEG, "MPO": ImageFormat.JPEG, "PNG": ImageFormat.PNG}


def luminance(pixels: np.ndarray) -> np.ndarray:
    """BT.601 luma as float64."""
    px = pixels.astype(np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def quant_table(quality: int) -> np.ndarray:
    """libjpeg's quality scaling of the standard luminance table."""
    q = int(min(max(quality, 1), 100))
    scale = 5000 // q if q < 50 else 200 - 2 * q
    t = np.floor((JPEG_LUMA_TABLE * scale + 50) / 100)
    return np.clip(t, 1, 255)


@lru_cache(maxsize=1)
def dct_matrix() -> np.ndarray:
    """Orthonormal 8-point DCT-II basis, rows are frequencies."""
    n = 8
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


def blockify(plane: np.ndarray, dy: int = 0, dx: int = 0) -> np.ndarray:
    """Split ``plane[dy:, dx:]`` into complete 8x8 blocks, shape (nby, nbx, 8, 8)."""
    p = plane[dy:, dx:]
    h = (p.shape[0] // 8) * 8
    w = (p.shape[1] // 8) * 8
    p = p[:h, :w]
    return p.reshape(h // 8, 8, w // 8, 8).swapaxes(1, 2)


def unblockify(blocks: np.ndarray) -> np.ndarray:
    nby, nbx = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(nby * 8, nbx * 8)


def block_dct(blocks: np.ndarray) -> np.ndarray:
    d = dct_matrix()
    return d @ blocks @ d.T


def block_idct(coefs: np.ndarray) -> np.ndarray:
    d = dct_matrix()
    return d.T @ coefs @ d


def requantize_plane(plane: np.ndarray, quality: int, keep_dc: bool = False) -> np.ndarray:
    """DCT-quantize-dequantize the block-aligned part of a luminance plane.

    With ``keep_dc`` the DC coefficients pass through untouched, so flat
    regions come back exactly.
    """
    out = plane.astype(np.float64).copy()
    blocks = blockify(out - 128.0)
    if blocks.size == 0:
        return out
    t = quant_table(quality)
    raw = block_dct(blocks)
    coefs = np.round(raw / t) * t
    if keep_dc:
        coefs[..., 0, 0] = raw[..., 0, 0]
    h, w = blocks.shape[0] * 8, blocks.shape[1] * 8
    out[:h, :w] = unblockify(block_idct(coefs)) + 128.0
    return out


def encode_jpeg(pixels: np.ndarray, quality: int) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, "RGB").save(buf, format="JPEG", quality=int(quality), subsampling=0, optimize=False)
    return buf.getvalue()


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, "RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def decode_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def jpeg_roundtrip(pixels: np.ndarray, quality: int) -> np.ndarray:
    return decode_bytes(encode_jpeg(pixels, quality))


def load_image(path, image_id: ImageId = 0) -> ImageRecord:
    with Image.open(path) as im:
        fmt = _FORMATS.get(im.format or "", ImageFormat.OTHER)
        px = np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    return ImageRecord(image_id, px, fmt, str(path))


def save_image(pixels: np.ndarray, path, quality=None) -> None:
    """Write JPEG when ``quality`` is given, PNG otherwise."""
    data = encode_png(pixels) if quality is None else encode_jpeg(pixels, quality)
    Path(path).write_bytes(data)


def resize(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    return np.asarray(Image.fromarray(pixels, "RGB").resize((width, height), Image.BILINEAR))
