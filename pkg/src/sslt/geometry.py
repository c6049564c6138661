"""Box arithmetic: expansion, minimum-size clamping, mask refinement, IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; (x, y) is the top-left corner, all values in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {vals}")

    def __iter__(self):
        return iter((self.x, self.y, self.w, self.h))

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> Box:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass
class GeometryConfig:
    expand_factor: float = 1.5
    min_size: float = 96.0
    salient_size: float = 32.0

    def validate(self, prefix: str = "geometry") -> None:
        if not self.expand_factor >= 1:
            raise ValueError(f"{prefix}.expand_factor must be >= 1")
        if not self.min_size >= 1:
            raise ValueError(f"{prefix}.min_size must be >= 1")
        if not self.salient_size >= 1:
            raise ValueError(f"{prefix}.salient_size must be >= 1")


def expand(f0: Box, sigma: float) -> Box:
    """Grow a box about its centre by ``sigma`` in both dimensions."""
    if sigma < 1:
        raise ValueError(f"expanding factor must be >= 1, got {sigma}")
    return Box(
        f0.x - (sigma - 1) * f0.w / 2.0,
        f0.y - (sigma - 1) * f0.h / 2.0,
        sigma * f0.w,
        sigma * f0.h,
    )


def _clamp_side(side: float, limit: float, tr: float) -> float:
    if side > limit:
        return float(limit)
    if side < tr:
        return float(tr)
    return side


def clamp_min(fe: Box, frame_size: tuple[int, int], tr: float) -> Box:
    """Enforce a minimum crop side ``tr`` and keep the box inside the frame.

    Sides larger than the frame collapse to the frame side, sides below ``tr``
    are raised to ``tr``, and negative origins go to 0. A box that would then
    run past the right/bottom edge is shifted back inside.
    """
    width, height = frame_size
    if tr > min(width, height):
        raise ValueError(f"minimum threshold {tr} exceeds frame side {min(width, height)}")
    wt = _clamp_side(fe.w, width, tr)
    ht = _clamp_side(fe.h, height, tr)
    xt = max(fe.x, 0.0)
    yt = max(fe.y, 0.0)
    if xt + wt > width:
        xt = width - wt
    if yt + ht > height:
        yt = height - ht
    return Box(xt, yt, wt, ht)


def tight_box(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Pixel-inclusive bounding box ``(x, y, w, h)`` of the true pixels."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    left, right = cols[0], cols[-1]
    high, low = rows[0], rows[-1]
    return int(left), int(high), int(right - left + 1), int(low - high + 1)


def refine_from_mask(mask: np.ndarray, origin: tuple[float, float] = (0, 0)) -> Box:
    """Box around the foreground of ``mask``, offset by the crop origin."""
    tb = tight_box(np.asarray(mask, dtype=bool))
    if tb is None:
        raise ValueError("cannot refine from an empty mask")
    left, high, w, h = tb
    return Box(origin[0] + left, origin[1] + high, w, h)


def is_salient_box(f0: Box, salient_size: float) -> bool:
    return f0.w >= salient_size and f0.h >= salient_size


def clip_box(box: Box, frame_size: tuple[int, int], min_side: float = 1.0) -> Box:
    """Intersect with the frame, keeping at least ``min_side`` pixels per side."""
    width, height = frame_size
    x0 = min(max(box.x, 0.0), width - min_side)
    y0 = min(max(box.y, 0.0), height - min_side)
    x1 = max(min(box.x + box.w, float(width)), x0 + min_side)
    y1 = max(min(box.y + box.h, float(height)), y0 + min_side)
    return Box(x0, y0, x1 - x0, y1 - y0)


def box_iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return float(inter / union)


def box_inside(box: Box, frame_size: tuple[int, int], tol: float = 1e-9) -> bool:
    width, height = frame_size
    return (box.x >= -tol and box.y >= -tol
            and box.x + box.w <= width + tol and box.y + box.h <= height + tol)
