"""Raster primitives shared by the tracker, saliency, segmentation and metrics.

Conventions used throughout the package:

* an image is a float64 array of shape ``(H, W)`` or ``(H, W, 3)`` with values in [0, 1];
* a scalar map is a float64 ``(H, W)`` array;
* a mask is a bool ``(H, W)`` array;
* a complex grid is a complex128 ``(H, W)`` array.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def round_half_up(v: float) -> int:
    # Python's round() is banker's rounding; rasterization must be half-up.
    return int(math.floor(v + 0.5))


def as_image(arr) -> np.ndarray:
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] not in (1, 3)):
        raise ValueError(f"unsupported image shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luma (Rec. 601 weights); single-channel input passes through."""
    if img.ndim == 2:
        return np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        return np.asarray(img[:, :, 0], dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ LUMA_WEIGHTS
    raise ValueError(f"unsupported channel count for shape {img.shape}")


def raster_box(box, shape: tuple[int, ...] | None = None) -> tuple[int, int, int, int]:
    """Round a real-valued box to integer ``(x, y, w, h)``.

    Origin and size are rounded half-up, size at least 1. When ``shape`` is
    given the raster is clamped to the image and a ValueError is raised if
    nothing remains.
    """
    x, y, w, h = (float(v) for v in box)
    if not (w > 0 and h > 0):
        raise ValueError(f"box {tuple(box)} has zero area")
    x0, y0 = round_half_up(x), round_half_up(y)
    rw, rh = max(1, round_half_up(w)), max(1, round_half_up(h))
    if shape is None:
        return x0, y0, rw, rh
    H, W = shape[0], shape[1]
    x1, y1 = min(W, x0 + rw), min(H, y0 + rh)
    x0, y0 = max(0, x0), max(0, y0)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"box {tuple(box)} lies entirely outside a {W}x{H} image")
    return x0, y0, x1 - x0, y1 - y0


def crop(img: np.ndarray, box) -> np.ndarray:
    x, y, w, h = raster_box(box, img.shape)
    return img[y:y + h, x:x + w].copy()


def _interp_axis(arr: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = arr.shape[axis]
    if n_in == n_out:
        return arr
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.floor(pos).astype(int)
    lo = np.clip(lo, 0, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    return a * (1.0 - frac) + b * frac


def resize(img: np.ndarray, w: int, h: int, mode: str = "bilinear") -> np.ndarray:
    """Resize to ``w`` x ``h`` with corner-aligned sampling.

    Masks (bool arrays) always use nearest sampling so that only values present
    in the input can appear in the output.
    """
    if w < 1 or h < 1:
        raise ValueError(f"target size {w}x{h} must be positive")
    H, W = img.shape[0], img.shape[1]
    if img.dtype == bool or mode == "nearest":
        ys = _nearest_index(H, h)
        xs = _nearest_index(W, w)
        return img[ys][:, xs].copy()
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode {mode!r}")
    out = _interp_axis(np.asarray(img, dtype=np.float64), h, 0)
    out = _interp_axis(out, w, 1)
    return np.array(out, dtype=np.float64, copy=True)


def _nearest_index(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1:
        return np.array([(n_in - 1) // 2])
    pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    return np.clip(np.floor(pos + 0.5).astype(int), 0, n_in - 1)


def dft2(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT."""
    return np.fft.fft2(np.asarray(x, dtype=np.float64))


def idft2(X: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT (1/(W*H) scaling), real part."""
    return np.fft.ifft2(X).real


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(m: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ceil(3*sigma), replicated edges."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    m = np.asarray(m, dtype=np.float64)
    if sigma == 0:
        return m.copy()
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(m, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def hann2d(h: int, w: int) -> np.ndarray:
    return np.outer(np.hanning(h), np.hanning(w))


def sample_patch(gray: np.ndarray, cx: float, cy: float, w: float, h: float,
                 out_w: int, out_h: int) -> np.ndarray:
    """Bilinearly sample a ``w`` x ``h`` window centred at (cx, cy) onto an
    ``out_w`` x ``out_h`` grid; pixels outside the image replicate the edge."""
    xs = cx - w / 2.0 + (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = cy - h / 2.0 + (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(gray, [yy, xx], order=1, mode="nearest")


# ---------------------------------------------------------------- PNG I/O

def read_png(path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_png(path, img: np.ndarray) -> None:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    data = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    PILImage.fromarray(data).save(Path(path), format="PNG", optimize=False)


def read_mask(path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def write_mask(path, mask: np.ndarray) -> None:
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    PILImage.fromarray(data).save(Path(path), format="PNG", optimize=False)


def quantize(img: np.ndarray) -> np.ndarray:
    """Round-trip through 8 bits, matching what write_png + read_png yields."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5) / 255.0
