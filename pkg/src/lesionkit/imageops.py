"""Low-level raster operations shared by hashing and augmentation.

Every operation here is part of the wire definition of downstream artifacts
(perceptual hashes, augmented tensors), so the conventions are fixed:

- grayscale uses luma weights 0.299 / 0.587 / 0.114
- resampling is bilinear with half-pixel-center coordinates, edges clamped
- rotation samples the inverse map bilinearly with symmetric-reflect padding
"""

from __future__ import annotations

import math

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Collapse an HxWx3 (or HxWx4, alpha ignored) array to HxW luma."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] >= 3:
        r, g, b = LUMA_WEIGHTS
        return r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2]
    if arr.ndim == 3 and arr.shape[2] == 1:
        return arr[:, :, 0]
    raise ValueError(f"unsupported image shape {arr.shape}")


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize, half-pixel centers, clamped at the border.

    Works on HxW or HxWxC float arrays; output is float64.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).reshape(-1, 1)
    wx = (xs - x0).reshape(1, -1)
    if arr.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    top = arr[y0][:, x0] * (1 - wx) + arr[y0][:, x1] * wx
    bot = arr[y1][:, x0] * (1 - wx) + arr[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    # symmetric reflection, edge pixel included: -1 -> 0, n -> n-1
    idx = np.mod(idx, 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def rotate_bilinear(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate about the image center, bilinear sampling, reflect-padded.

    Output has the same shape as the input. angle_deg is counterclockwise
    in pixel coordinates.
    """
    arr = np.asarray(img, dtype=np.float64)
    if angle_deg == 0.0:
        return arr.copy()
    h, w = arr.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    dx = xx - cx
    dy = yy - cy
    # inverse map: rotate output coordinates by -theta
    xs = cos_t * dx + sin_t * dy + cx
    ys = -sin_t * dx + cos_t * dy + cy
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    wx = xs - x0
    wy = ys - y0
    x0r = _reflect_index(x0, w)
    x1r = _reflect_index(x0 + 1, w)
    y0r = _reflect_index(y0, h)
    y1r = _reflect_index(y0 + 1, h)
    if arr.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    top = arr[y0r, x0r] * (1 - wx) + arr[y0r, x1r] * wx
    bot = arr[y1r, x0r] * (1 - wx) + arr[y1r, x1r] * wx
    return top * (1 - wy) + bot * wy


def hflip(img: np.ndarray) -> np.ndarray:
    return np.asarray(img)[:, ::-1].copy()


def vflip(img: np.ndarray) -> np.ndarray:
    return np.asarray(img)[::-1, :].copy()
