"""Multi-channel correlation filter tracker over HOG features.

The filter is the closed-form per-frequency ridge solution::

    numerator_l = conj(Y) * X_l
    denominator = sum_l X_l * conj(X_l) + lambda

and detection evaluates ``idft(sum_l conj(numerator_l) * Z_l / denominator)``.
A small pool of scale ratios is searched each frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .geometry import Box, clip_box
from .imaging import hann2d, sample_patch, to_grayscale


class TrackerError(RuntimeError):
    pass


@dataclass
class TrackerConfig:
    padding: float = 2.0
    regularization: float = 1e-2
    learning_rate: float = 0.025
    sigma_factor: float = 0.1
    cell_size: int = 4
    orientation_bins: int = 9
    scale_pool: list = field(default_factory=lambda: [0.95, 1.0, 1.05])
    max_cells: int = 96
    scale_damping: float = 0.3

    def validate(self, prefix: str = "tracker") -> None:
        if not self.regularization > 0:
            raise ValueError(f"{prefix}.regularization must be > 0")
        if not 0 <= self.learning_rate <= 1:
            raise ValueError(f"{prefix}.learning_rate must be in [0, 1]")
        if not any(abs(s - 1.0) < 1e-12 for s in self.scale_pool):
            raise ValueError(f"{prefix}.scale_pool must contain 1.0")
        if any(s <= 0 for s in self.scale_pool):
            raise ValueError(f"{prefix}.scale_pool ratios must be > 0")
        if not self.padding > 1:
            raise ValueError(f"{prefix}.padding must be > 1")
        if self.cell_size <= 0 or self.orientation_bins <= 0:
            raise ValueError(f"{prefix}.cell_size and orientation_bins must be > 0")
        if self.max_cells < 4:
            raise ValueError(f"{prefix}.max_cells must be >= 4")


@dataclass
class TrackerState:
    numerator: np.ndarray      # (channels, gh, gw) complex
    denominator: np.ndarray    # (gh, gw) complex, lambda included
    label_hat: np.ndarray
    window: np.ndarray
    target_size: tuple[float, float]
    center: tuple[float, float]
    scale: float
    grid: tuple[int, int]      # (gw, gh) feature cells
    px_per_model_px: float     # window pixels per model pixel at scale 1
    frame_shape: tuple
    config: TrackerConfig
    last_response: np.ndarray | None = None


class BoxProposer(Protocol):
    """Anything that yields one box per frame after initialisation."""

    def init(self, frame: np.ndarray, box: Box) -> None: ...

    def step(self, frame: np.ndarray) -> Box: ...


# ------------------------------------------------------------------- HOG

def _gradients(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = np.pad(p, 1, mode="edge")
    gx = q[1:-1, 2:] - q[1:-1, :-2]
    gy = q[2:, 1:-1] - q[:-2, 1:-1]
    return gx, gy


def extract_hog(patch: np.ndarray, cell: int = 4, bins: int = 9, eps: float = 1e-3) -> np.ndarray:
    """Unsigned-orientation HOG, returned as ``(bins, H // cell, W // cell)``.

    Bin ``k`` is centred on orientation ``k * pi / bins`` with linear vote
    splitting between neighbouring bins. Each cell is normalized within the
    four 2x2 blocks that contain it (L2, clip at 0.2, L2 again) and the four
    results are averaged.
    """
    if cell <= 0 or bins <= 0:
        raise ValueError("cell and bins must be positive")
    p = np.asarray(patch, dtype=np.float64)
    H, W = p.shape
    ph, pw = (-H) % cell, (-W) % cell
    if ph or pw:
        p = np.pad(p, ((0, ph), (0, pw)), mode="edge")
    gx, gy = _gradients(p)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    pos = ang / (np.pi / bins)
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    lo %= bins
    hi = (lo + 1) % bins

    ch, cw = p.shape[0] // cell, p.shape[1] // cell
    votes = np.zeros((bins,) + p.shape)
    rows, cols = np.indices(p.shape)
    np.add.at(votes, (lo, rows, cols), mag * (1 - frac))
    np.add.at(votes, (hi, rows, cols), mag * frac)
    hist = votes.reshape(bins, ch, cell, cw, cell).sum(axis=(2, 4))

    g = np.pad(hist, ((0, 0), (1, 1), (1, 1)), mode="edge")
    blocks = np.stack([g[:, :-1, :-1], g[:, :-1, 1:], g[:, 1:, :-1], g[:, 1:, 1:]], axis=1)
    norm = np.sqrt((blocks ** 2).sum(axis=(0, 1)) + eps ** 2)
    blocks = np.minimum(blocks / norm, 0.2)
    norm = np.sqrt((blocks ** 2).sum(axis=(0, 1)) + eps ** 2)
    blocks = blocks / norm
    out = (blocks[:, 3, :-1, :-1] + blocks[:, 2, :-1, 1:]
           + blocks[:, 1, 1:, :-1] + blocks[:, 0, 1:, 1:]) / 4.0
    return out


# --------------------------------------------------------------- tracker

def _features(gray, state_like, cx, cy, scale) -> np.ndarray:
    cfg = state_like.config
    gw, gh = state_like.grid
    mw, mh = gw * cfg.cell_size, gh * cfg.cell_size
    win_w = mw * state_like.px_per_model_px * scale
    win_h = mh * state_like.px_per_model_px * scale
    patch = sample_patch(gray, cx, cy, win_w, win_h, mw, mh)
    feat = extract_hog(patch, cfg.cell_size, cfg.orientation_bins)
    return feat * state_like.window


def _train(feat: np.ndarray, label_hat: np.ndarray, lam: float):
    xf = np.fft.fft2(feat, axes=(-2, -1))
    num = np.conj(label_hat)[None] * xf
    den = (xf * np.conj(xf)).sum(axis=0) + lam
    return num, den


def _response(state: TrackerState, feat: np.ndarray) -> np.ndarray:
    zf = np.fft.fft2(feat, axes=(-2, -1))
    rf = (np.conj(state.numerator) * zf).sum(axis=0) / state.denominator
    return np.fft.ifft2(rf).real


def gaussian_label(gw: int, gh: int, sigma: float) -> np.ndarray:
    ys = np.arange(gh) - gh // 2
    xs = np.arange(gw) - gw // 2
    return np.exp(-0.5 * (ys[:, None] ** 2 + xs[None, :] ** 2) / sigma ** 2)


def track_init(frame: np.ndarray, box: Box, cfg: TrackerConfig | None = None) -> TrackerState:
    cfg = cfg or TrackerConfig()
    cfg.validate()
    if box.w < 4 or box.h < 4:
        raise TrackerError(f"initial box {box.as_tuple()} is too small (< 4 px)")
    gray = to_grayscale(frame)
    H, W = gray.shape
    cx, cy = box.center
    if not (0 <= cx <= W and 0 <= cy <= H):
        raise TrackerError(f"initial box {box.as_tuple()} is outside the frame")

    win_w, win_h = box.w * cfg.padding, box.h * cfg.padding
    cells_w, cells_h = win_w / cfg.cell_size, win_h / cfg.cell_size
    shrink = max(1.0, max(cells_w, cells_h) / cfg.max_cells)
    gw = max(4, int(round(cells_w / shrink)))
    gh = max(4, int(round(cells_h / shrink)))
    px_per_model_px = max(win_w / (gw * cfg.cell_size), win_h / (gh * cfg.cell_size))

    sigma_cells = math.sqrt(box.w * box.h) * cfg.sigma_factor / (cfg.cell_size * px_per_model_px)
    label_hat = np.fft.fft2(gaussian_label(gw, gh, sigma_cells))
    state = TrackerState(
        numerator=None, denominator=None, label_hat=label_hat,
        window=hann2d(gh, gw), target_size=(box.w, box.h), center=(cx, cy),
        scale=1.0, grid=(gw, gh), px_per_model_px=px_per_model_px,
        frame_shape=frame.shape, config=cfg,
    )
    feat = _features(gray, state, cx, cy, 1.0)
    state.numerator, state.denominator = _train(feat, label_hat, cfg.regularization)
    return state


def _subpixel_peak(resp: np.ndarray) -> tuple[float, float]:
    gh, gw = resp.shape
    py, px = np.unravel_index(int(np.argmax(resp)), resp.shape)

    def fit(m1, c, p1):
        denom = m1 - 2 * c + p1
        if denom >= 0:
            return 0.0
        return float(np.clip(0.5 * (m1 - p1) / denom, -0.5, 0.5))

    # 3x3 neighbourhood with circular wrap (the response is periodic).
    nb = resp[np.ix_([(py - 1) % gh, py, (py + 1) % gh], [(px - 1) % gw, px, (px + 1) % gw])]
    dy = fit(nb[0, 1], nb[1, 1], nb[2, 1])
    dx = fit(nb[1, 0], nb[1, 1], nb[1, 2])
    return py + dy, px + dx


def detect(state: TrackerState, frame: np.ndarray, scale_ratio: float = 1.0) -> np.ndarray:
    gray = to_grayscale(frame)
    feat = _features(gray, state, *state.center, state.scale * scale_ratio)
    return _response(state, feat)


def track_step(state: TrackerState, frame: np.ndarray) -> tuple[Box, TrackerState]:
    """Locate the target in ``frame``; returns the box and the updated state.

    The input state is not modified.
    """
    if frame.shape != state.frame_shape:
        raise TrackerError(f"frame shape {frame.shape} differs from init shape {state.frame_shape}")
    cfg = state.config
    gray = to_grayscale(frame)
    best = None
    for s in cfg.scale_pool:
        feat = _features(gray, state, *state.center, state.scale * s)
        resp = _response(state, feat)
        if not np.all(np.isfinite(resp)):
            raise TrackerError("non-finite correlation response")
        peak = float(resp.max())
        if best is None or peak > best[0]:
            best = (peak, s, resp)
    _, s_best, resp = best

    gw, gh = state.grid
    py, px = _subpixel_peak(resp)
    dy_cells = _wrap(py - gh // 2, gh)
    dx_cells = _wrap(px - gw // 2, gw)
    step = cfg.cell_size * state.px_per_model_px * state.scale * s_best
    H, W = gray.shape
    cx = float(np.clip(state.center[0] + dx_cells * step, 0, W - 1))
    cy = float(np.clip(state.center[1] + dy_cells * step, 0, H - 1))
    scale = (1 - cfg.scale_damping) * state.scale + cfg.scale_damping * state.scale * s_best

    new = replace(state, center=(cx, cy), scale=scale, last_response=resp)
    eta = cfg.learning_rate
    if eta > 0:
        feat = _features(gray, new, cx, cy, scale)
        num, den = _train(feat, state.label_hat, cfg.regularization)
        new.numerator = (1 - eta) * state.numerator + eta * num
        new.denominator = (1 - eta) * state.denominator + eta * den
    return current_box(new), new


def _wrap(d: float, n: int) -> float:
    # Displacements past half the grid alias to the other side.
    if d > n / 2:
        d -= n
    elif d < -n / 2:
        d += n
    return d


def current_box(state: TrackerState) -> Box:
    w = state.target_size[0] * state.scale
    h = state.target_size[1] * state.scale
    H, W = state.frame_shape[0], state.frame_shape[1]
    return clip_box(Box.from_center(*state.center, w, h), (W, H))


def recenter(state: TrackerState, center: tuple[float, float]) -> TrackerState:
    return replace(state, center=(float(center[0]), float(center[1])))


def track_sequence(frames, init_box: Box, cfg: TrackerConfig | None = None) -> list[Box]:
    """Tracker-only trajectory; the first entry is ``init_box`` itself."""
    state = track_init(frames[0], init_box, cfg)
    boxes = [init_box]
    for frame in frames[1:]:
        box, state = track_step(state, frame)
        boxes.append(box)
    return boxes


class CorrelationTracker:
    """BoxProposer wrapper around the functional API."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.state = None

    def init(self, frame, box):
        self.state = track_init(frame, box, self.cfg)

    def step(self, frame):
        box, self.state = track_step(self.state, frame)
        return box
