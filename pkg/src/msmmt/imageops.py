"""Shared low-level image operations: bilinear warps, resizing, pyramids.

All images are float arrays, H x W (grayscale) or H x W x C. Coordinates
follow (x, y) = (column, row) convention for points and transforms.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = [
    "bilinear_resize",
    "warp_affine",
    "warp_displacement",
    "translate",
    "gaussian_blur",
    "pyramid_down",
    "pyramid_up",
    "to_gray",
]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma-weighted grayscale; passes 2-D input through."""
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ LUMA_WEIGHTS.astype(img.dtype)
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    raise ValueError(f"cannot convert shape {img.shape} to grayscale")


def _sample(channel: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(
        channel, [ys, xs], order=1, mode="nearest", prefilter=False
    )


def _per_channel(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return _sample(img, ys, xs).astype(img.dtype)
    out = np.empty(ys.shape + (img.shape[2],), dtype=img.dtype)
    for c in range(img.shape[2]):
        out[..., c] = _sample(img[..., c], ys, xs)
    return out


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize to (out_h, out_w) with bilinear sampling, pixel-center aligned."""
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    # map output pixel centers onto input pixel centers
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return _per_channel(img, yy, xx)


def warp_affine(
    img: np.ndarray, matrix: np.ndarray, out_shape: tuple[int, int] | None = None
) -> np.ndarray:
    """Warp by a 2x3 forward affine matrix mapping input (x, y) to output (x, y).

    Output pixel (x', y') samples the input at the inverse-mapped location.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.shape != (2, 3):
        raise ValueError("affine matrix must be 2x3")
    h, w = img.shape[:2]
    if out_shape is None:
        out_shape = (h, w)
    full = np.vstack([a, [0.0, 0.0, 1.0]])
    inv = np.linalg.inv(full)
    yy, xx = np.meshgrid(
        np.arange(out_shape[0], dtype=np.float64),
        np.arange(out_shape[1], dtype=np.float64),
        indexing="ij",
    )
    src_x = inv[0, 0] * xx + inv[0, 1] * yy + inv[0, 2]
    src_y = inv[1, 0] * xx + inv[1, 1] * yy + inv[1, 2]
    return _per_channel(img, src_y, src_x)


def warp_displacement(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``img`` at (x + u, y + v): backward warp by a displacement field."""
    h, w = img.shape[:2]
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return _per_channel(img, yy + v, xx + u)


def translate(img: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Shift content by (+dx, +dy) pixels with bilinear sampling."""
    m = np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]])
    return warp_affine(img, m)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if img.ndim == 2:
        return ndimage.gaussian_filter(img, sigma, mode="nearest")
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[..., c] = ndimage.gaussian_filter(img[..., c], sigma, mode="nearest")
    return out


def pyramid_down(img: np.ndarray) -> np.ndarray:
    """Blur then 2x decimate; extents halve with ceil rounding."""
    blurred = gaussian_blur(img, 1.0)
    return blurred[::2, ::2].copy()


def pyramid_up(img: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear expansion back to ``out_shape`` (the matching build step's size)."""
    return bilinear_resize(img, out_shape[0], out_shape[1])
