"""Diagnostic overlays: GT box, tracker box, final box and mask contour per frame."""

from __future__ import annotations

import numpy as np

from .imaging import raster_box
from .metrics import boundary

COLORS = {
    "gt": (0.0, 1.0, 0.0),
    "f0": (0.2, 0.4, 1.0),
    "final": (1.0, 0.1, 0.1),
    "contour": (1.0, 1.0, 0.0),
}


def draw_box(img: np.ndarray, box, color) -> None:
    H, W = img.shape[:2]
    try:
        x, y, w, h = raster_box(box, img.shape)
    except ValueError:
        return
    x1, y1 = min(x + w - 1, W - 1), min(y + h - 1, H - 1)
    img[y, x:x1 + 1] = color
    img[y1, x:x1 + 1] = color
    img[y:y1 + 1, x] = color
    img[y:y1 + 1, x1] = color


def render(frame: np.ndarray, gt_box=None, f0=None, final=None, mask=None) -> np.ndarray:
    img = frame.copy() if frame.ndim == 3 else np.repeat(frame[:, :, None], 3, axis=2)
    if mask is not None:
        img[boundary(mask)] = COLORS["contour"]
    for key, box in (("gt", gt_box), ("f0", f0), ("final", final)):
        if box is not None:
            draw_box(img, box, COLORS[key])
    return img
