"""Saliency maps inside crops, their binarization, and pseudo-label selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .geometry import Box
from .imaging import dft2, gaussian_blur, resize, round_half_up, to_grayscale


class SaliencyError(RuntimeError):
    pass


@dataclass
class SaliencyConfig:
    backend: str = "spectral-residual"
    working_width: int = 64
    smoothing_sigma: float = 2.5
    binarize_mode: str = "relative-threshold"
    relative_threshold: float = 0.2
    candidates: int = 10
    seed: int = 0

    def validate(self, prefix: str = "saliency") -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"{prefix}.backend must be one of {sorted(BACKENDS)}")
        if self.working_width < 16:
            raise ValueError(f"{prefix}.working_width must be >= 16")
        if self.binarize_mode not in ("literal-nonzero", "relative-threshold"):
            raise ValueError(f"{prefix}.binarize_mode must be 'literal-nonzero' or 'relative-threshold'")
        if not 0 < self.relative_threshold < 1:
            raise ValueError(f"{prefix}.relative_threshold must be in (0, 1)")
        if self.candidates < 1:
            raise ValueError(f"{prefix}.candidates must be >= 1")
        if self.smoothing_sigma < 0:
            raise ValueError(f"{prefix}.smoothing_sigma must be >= 0")


@dataclass
class PseudoLabel:
    frame_index: int
    crop_box: Box
    mask: np.ndarray
    area: int


def spectral_residual(gray: np.ndarray, working_width: int = 64, sigma: float = 2.5) -> np.ndarray:
    """Spectral-residual saliency of a grayscale map, normalized to [0, 1]."""
    H, W = gray.shape
    if np.ptp(gray) == 0:
        return np.zeros((H, W))
    ww = working_width
    wh = max(1, round_half_up(ww * H / W))
    small = resize(gray, ww, wh)
    spec = dft2(small)
    log_amp = np.log(np.abs(spec) + 1e-12)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="nearest")
    s = np.abs(np.fft.ifft2(np.exp(residual + 1j * np.angle(spec)))) ** 2
    s = gaussian_blur(s, sigma)
    lo, hi = s.min(), s.max()
    if hi - lo <= 0:
        return np.zeros((H, W))
    s = (s - lo) / (hi - lo)
    return np.clip(resize(s, W, H), 0.0, 1.0)


BACKENDS: dict[str, Callable[[np.ndarray, SaliencyConfig], np.ndarray]] = {
    "spectral-residual": lambda g, cfg: spectral_residual(g, cfg.working_width, cfg.smoothing_sigma),
}


def saliency_map(crop: np.ndarray, cfg: SaliencyConfig | None = None) -> np.ndarray:
    cfg = cfg or SaliencyConfig()
    if crop.shape[0] < 16 or crop.shape[1] < 16:
        raise SaliencyError(f"crop {crop.shape[1]}x{crop.shape[0]} is smaller than 16 px per side")
    return BACKENDS[cfg.backend](to_grayscale(crop), cfg)


def binarize(p: np.ndarray, cfg: SaliencyConfig | None = None) -> np.ndarray:
    cfg = cfg or SaliencyConfig()
    p = np.asarray(p, dtype=np.float64)
    if cfg.binarize_mode == "literal-nonzero":
        return p != 0
    top = p.max() if p.size else 0.0
    if top <= 0:
        return np.zeros(p.shape, dtype=bool)
    return p > cfg.relative_threshold * top


def salient_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask))


def select_pseudo_label(crops, cfg: SaliencyConfig | None = None) -> PseudoLabel:
    """Pick the largest-area saliency mask among up to K randomly drawn crops.

    ``crops`` is a sequence of ``(frame_index, box, image)``. Ties go to the
    smallest frame index.
    """
    cfg = cfg or SaliencyConfig()
    crops = list(crops)
    if not crops:
        raise SaliencyError("no crops to choose a pseudo-label from")
    rng = np.random.default_rng(cfg.seed)
    picks = rng.choice(len(crops), size=min(cfg.candidates, len(crops)), replace=False)
    best = None
    for i in sorted(int(k) for k in picks):
        index, box, img = crops[i]
        mask = binarize(saliency_map(img, cfg), cfg)
        area = salient_area(mask)
        if best is None or area > best.area or (area == best.area and index < best.frame_index):
            best = PseudoLabel(int(index), box, mask, area)
    if best.area == 0:
        raise SaliencyError("every candidate crop has an empty saliency mask")
    return best
