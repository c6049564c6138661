"""Tracking (DP / OP curves) and segmentation (S-measure, J, F) metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import box_iou
from .imaging import round_half_up

EPS = 1e-12


@dataclass
class CurveReport:
    thresholds: list
    values: list
    score_at_reference: float
    auc: float


@dataclass
class SegReport:
    s_measure: float
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float
    fps: float


DP_THRESHOLDS = [float(t) for t in range(0, 101)]
OP_THRESHOLDS = [round(0.01 * t, 2) for t in range(0, 101)]


def _check_lengths(a, b):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} predictions vs {len(b)} ground truths")


def center_distance(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return math.hypot((ax + aw / 2) - (bx + bw / 2), (ay + ah / 2) - (by + bh / 2))


def dp_curve(pred, gt, thresholds=None, reference: float = 100.0) -> CurveReport:
    """Distance precision: fraction of frames with centre error < t."""
    _check_lengths(pred, gt)
    thresholds = list(DP_THRESHOLDS if thresholds is None else thresholds)
    d = np.array([center_distance(p, g) for p, g in zip(pred, gt)])
    values = [float(np.mean(d < t)) if d.size else 0.0 for t in thresholds]
    ref = float(np.mean(d < reference)) if d.size else 0.0
    return CurveReport(thresholds, values, ref, float(np.mean(values)))


def op_curve(pred, gt, thresholds=None, reference: float = 0.5) -> CurveReport:
    """Overlap precision / success: fraction of frames with IoU > t."""
    _check_lengths(pred, gt)
    thresholds = list(OP_THRESHOLDS if thresholds is None else thresholds)
    ious = np.array([box_iou(p, g) for p, g in zip(pred, gt)])
    values = [float(np.mean(ious > t)) if ious.size else 0.0 for t in thresholds]
    ref = float(np.mean(ious > reference)) if ious.size else 0.0
    return CurveReport(thresholds, values, ref, float(np.mean(values)))


# -------------------------------------------------------------- S-measure

def _object_score(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    m = x.mean()
    return float(2.0 * m / (m * m + 1.0 + x.std() + EPS))


def _ssim(x: np.ndarray, y: np.ndarray) -> float:
    n = x.size
    mx, my = x.mean(), y.mean()
    if n > 1:
        vx = ((x - mx) ** 2).sum() / (n - 1)
        vy = ((y - my) ** 2).sum() / (n - 1)
        cxy = ((x - mx) * (y - my)).sum() / (n - 1)
    else:
        vx = vy = cxy = 0.0
    alpha = 4.0 * mx * my * cxy
    beta = (mx * mx + my * my) * (vx + vy)
    if alpha != 0:
        return float(alpha / (beta + EPS))
    return 1.0 if beta == 0 else 0.0


def s_measure(sm: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure between a [0, 1] map and a binary ground truth."""
    sm = np.asarray(sm, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    if sm.shape != gt.shape:
        raise ValueError(f"shape mismatch {sm.shape} vs {gt.shape}")
    mu = gt.mean()
    if mu == 0:
        return float(1.0 - sm.mean())
    if mu == 1:
        return float(sm.mean())

    s_obj = mu * _object_score(sm[gt]) + (1 - mu) * _object_score(1.0 - sm[~gt])

    H, W = gt.shape
    rows, cols = np.nonzero(gt)
    X = min(max(round_half_up(cols.mean()) + 1, 0), W)
    Y = min(max(round_half_up(rows.mean()) + 1, 0), H)
    s_reg = 0.0
    for ys, xs in ((slice(0, Y), slice(0, X)), (slice(0, Y), slice(X, W)),
                   (slice(Y, H), slice(0, X)), (slice(Y, H), slice(X, W))):
        block = gt[ys, xs]
        if block.size == 0:
            continue
        s_reg += block.size / gt.size * _ssim(sm[ys, xs], block.astype(np.float64))

    return float(max(0.0, alpha * s_obj + (1 - alpha) * s_reg))


# ------------------------------------------------------------------ J / F

def mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def decay(values) -> float:
    """Mean of the first temporal quarter minus mean of the last."""
    bins = [b for b in np.array_split(np.asarray(values, dtype=np.float64), 4) if b.size]
    if not bins:
        return 0.0
    return float(bins[0].mean() - bins[-1].mean())


def _summary(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(np.mean(v > 0.5)), decay(v)


def _check_masks(pred, gt):
    _check_lengths(pred, gt)
    for i, (p, g) in enumerate(zip(pred, gt)):
        if np.shape(p) != np.shape(g):
            raise ValueError(f"frame {i}: mask shape {np.shape(p)} vs {np.shape(g)}")


def j_stats(pred, gt) -> tuple[float, float, float]:
    _check_masks(pred, gt)
    return _summary([mask_iou(p, g) for p, g in zip(pred, gt)])


_CROSS = ndimage.generate_binary_structure(2, 1)


def boundary(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndimage.binary_erosion(mask, structure=_CROSS, border_value=0)


def _disk(r: int) -> np.ndarray:
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def boundary_prf(pred: np.ndarray, gt: np.ndarray, tolerance: float = 0.008) -> tuple[float, float, float]:
    """(precision, recall, F) of boundary agreement within a disk tolerance."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    pb, gb = boundary(pred), boundary(gt)
    np_, ng = np.count_nonzero(pb), np.count_nonzero(gb)
    if np_ == 0 and ng == 0:
        return 1.0, 1.0, 1.0
    if np_ == 0 or ng == 0:
        return 0.0, 0.0, 0.0
    r = max(1, int(math.ceil(tolerance * math.hypot(*pb.shape))))
    disk = _disk(r)
    gd = ndimage.binary_dilation(gb, structure=disk)
    pd = ndimage.binary_dilation(pb, structure=disk)
    precision = np.count_nonzero(pb & gd) / np_
    recall = np.count_nonzero(gb & pd) / ng
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def f_stats(pred, gt, tolerance: float = 0.008) -> tuple[float, float, float]:
    _check_masks(pred, gt)
    return _summary([boundary_prf(p, g, tolerance)[2] for p, g in zip(pred, gt)])
