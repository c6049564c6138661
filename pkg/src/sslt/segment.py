"""Compact fully-convolutional pixel classifier trained online on one pseudo-label.

Architecture (all 3x3, stride 1, zero padding)::

    input  5 x S x S    (R, G, B, x in [-1, 1], y in [-1, 1])
    conv   5 -> 16, ReLU
    conv  16 -> 16, ReLU
    conv  16 -> 1,  sigmoid
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import resize

log = logging.getLogger(__name__)

ARCH = ((5, 16), (16, 16), (16, 1))
HEADER_MAGIC = "sslt-segmodel"
HEADER_VERSION = 1


class SegmentationError(RuntimeError):
    pass


@dataclass
class SegModel:
    weights: list           # per layer: (cout, cin, 3, 3)
    biases: list            # per layer: (cout,)
    input_size: int = 96
    seed: int = 0
    loss_trace: list = field(default_factory=list)

    @property
    def architecture(self) -> list[tuple[int, int]]:
        return [(w.shape[1], w.shape[0]) for w in self.weights]

    def copy(self) -> SegModel:
        return SegModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.input_size, self.seed, list(self.loss_trace))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class TrainConfig:
    iterations: int = 300
    learning_rate: float = 1e-2
    momentum: float = 0.9
    flip_probability: float = 0.5
    threshold: float = 0.5
    seed: int = 0

    def validate(self, prefix: str = "train") -> None:
        if self.iterations < 1:
            raise ValueError(f"{prefix}.iterations must be >= 1")
        if self.learning_rate < 0:
            raise ValueError(f"{prefix}.learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"{prefix}.momentum must be in [0, 1)")
        if not 0 <= self.flip_probability <= 1:
            raise ValueError(f"{prefix}.flip_probability must be in [0, 1]")
        if not 0 < self.threshold < 1:
            raise ValueError(f"{prefix}.threshold must be in (0, 1)")


def init_model(seed: int = 0, input_size: int = 96) -> SegModel:
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for cin, cout in ARCH:
        bound = math.sqrt(6.0 / (cin * 9))
        weights.append(rng.uniform(-bound, bound, size=(cout, cin, 3, 3)))
        biases.append(np.zeros(cout))
    return SegModel(weights, biases, input_size, seed)


# ------------------------------------------------------------ conv core

def _im2col(x: np.ndarray) -> np.ndarray:
    C, H, W = x.shape
    p = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((C, 3, 3, H, W))
    for dy in range(3):
        for dx in range(3):
            cols[:, dy, dx] = p[:, dy:dy + H, dx:dx + W]
    return cols.reshape(C * 9, H * W)


def _col2im(dcols: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    C, H, W = shape
    d = dcols.reshape(C, 3, 3, H, W)
    acc = np.zeros((C, H + 2, W + 2))
    for dy in range(3):
        for dx in range(3):
            acc[:, dy:dy + H, dx:dx + W] += d[:, dy, dx]
    return acc[:, 1:-1, 1:-1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _forward_tensor(model: SegModel, x: np.ndarray, keep: bool = False):
    """Logits for input tensor ``x`` (5, H, W); with ``keep`` also the cache."""
    cache = []
    a = x
    n = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        cols = _im2col(a)
        z = (w.reshape(w.shape[0], -1) @ cols + b[:, None]).reshape(w.shape[0], *a.shape[1:])
        if keep:
            cache.append((a.shape, cols, z))
        a = np.maximum(z, 0.0) if i < n - 1 else z
    return (a[0], cache) if keep else a[0]


def coord_channels(h: int, w: int) -> np.ndarray:
    xs = np.linspace(-1.0, 1.0, w) if w > 1 else np.zeros(1)
    ys = np.linspace(-1.0, 1.0, h) if h > 1 else np.zeros(1)
    return np.stack([np.broadcast_to(xs[None, :], (h, w)), np.broadcast_to(ys[:, None], (h, w))])


def rgb_channels(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.repeat(img[None], 3, axis=0)
    if img.shape[2] == 1:
        return np.repeat(img[None, :, :, 0], 3, axis=0)
    return np.transpose(img, (2, 0, 1))


def input_tensor(crop: np.ndarray, w: int, h: int) -> np.ndarray:
    rgb = rgb_channels(resize(crop, w, h))
    return np.concatenate([rgb, coord_channels(h, w)], axis=0)


def forward(model: SegModel, crop: np.ndarray, size: tuple[int, int] | None = None) -> np.ndarray:
    """Foreground probabilities for ``crop``, at the crop's own resolution.

    The crop is processed at ``size`` = (w, h), by default the model's square
    input resolution.
    """
    if crop.shape[0] < 1 or crop.shape[1] < 1:
        raise SegmentationError("empty crop")
    w, h = size or (model.input_size, model.input_size)
    logits = _forward_tensor(model, input_tensor(crop, w, h))
    if not np.all(np.isfinite(logits)):
        raise SegmentationError(f"non-finite activations (trained for {len(model.loss_trace)} iterations)")
    prob = _sigmoid(logits)
    return resize(prob, crop.shape[1], crop.shape[0])


def segment_crop(model: SegModel, crop: np.ndarray, threshold: float = 0.5,
                 size: tuple[int, int] | None = None) -> np.ndarray:
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return forward(model, crop, size) > threshold


# ------------------------------------------------------------- training

def class_weights(label: np.ndarray) -> tuple[float, float, bool]:
    """(positive weight, negative weight, balanced?) for a boolean label."""
    n = label.size
    pos = int(np.count_nonzero(label))
    if pos == 0 or pos == n:
        return 1.0, 1.0, False
    beta = (n - pos) / n
    return beta, 1.0 - beta, True


def _loss_tensor(model: SegModel, x: np.ndarray, label: np.ndarray):
    logits, cache = _forward_tensor(model, x, keep=True)
    wp, wn, balanced = class_weights(label)
    n = label.size
    pos = label.astype(np.float64)
    # -log(y) = softplus(-z), -log(1 - y) = softplus(z)
    loss = (wp * (pos * _softplus(-logits)).sum() + wn * ((1 - pos) * _softplus(logits)).sum()) / n
    y = _sigmoid(logits)
    dz = (wn * (1 - pos) * y - wp * pos * (1 - y)) / n

    grads_w, grads_b = [None] * len(model.weights), [None] * len(model.weights)
    d = dz[None]
    for i in range(len(model.weights) - 1, -1, -1):
        shape, cols, z = cache[i]
        w = model.weights[i]
        if i < len(model.weights) - 1:
            d = d * (z > 0)
        dflat = d.reshape(d.shape[0], -1)
        grads_w[i] = (dflat @ cols.T).reshape(w.shape)
        grads_b[i] = dflat.sum(axis=1)
        if i > 0:
            d = _col2im(w.reshape(w.shape[0], -1).T @ dflat, shape)
    return float(loss), grads_w, grads_b, balanced


def loss_and_grad(model: SegModel, crop: np.ndarray, label: np.ndarray):
    """Class-balanced BCE (mean over pixels) and its exact gradients.

    Returns ``(loss, grads)`` where ``grads`` is a list of ``(dW, db)`` per
    layer. A single-class label falls back to unweighted BCE and logs a
    warning.
    """
    s = model.input_size
    x = input_tensor(crop, s, s)
    lab = resize(np.asarray(label, dtype=bool), s, s)
    loss, gw, gb, balanced = _loss_tensor(model, x, lab)
    if not balanced:
        log.warning("label has a single class; using unweighted BCE")
    return loss, list(zip(gw, gb))


def fine_tune(model: SegModel, label: np.ndarray, crop: np.ndarray, cfg: TrainConfig | None = None) -> SegModel:
    """SGD with momentum on one (crop, label) pair; returns a new model.

    ``label`` may be a PseudoLabel (its mask is used) or a boolean mask with
    the crop's dimensions.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    mask = getattr(label, "mask", label)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != crop.shape[:2]:
        raise SegmentationError(f"label {mask.shape} does not match crop {crop.shape[:2]}")
    s = model.input_size
    x = input_tensor(crop, s, s)
    lab = resize(mask, s, s)
    x_flip = np.concatenate([x[:3, :, ::-1], x[3:]], axis=0)
    lab_flip = lab[:, ::-1]
    if class_weights(lab)[2] is False:
        log.warning("pseudo-label has a single class; using unweighted BCE")

    out = model.copy()
    params = out.params()
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    for it in range(cfg.iterations):
        flip = rng.random() < cfg.flip_probability
        loss, gw, gb, _ = _loss_tensor(out, x_flip if flip else x, lab_flip if flip else lab)
        if not math.isfinite(loss):
            raise SegmentationError(f"non-finite loss at iteration {it}; trace tail {out.loss_trace[-5:]}")
        out.loss_trace.append(loss)
        grads = [g for pair in zip(gw, gb) for g in pair]
        for p, v, g in zip(params, velocity, grads):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
    return out


# ------------------------------------------------------------ save/load

def save_model(model: SegModel, path) -> None:
    layers = ",".join(f"conv3x3:{cin}:{cout}" for cin, cout in model.architecture)
    header = (f"{HEADER_MAGIC} {HEADER_VERSION}\n"
              f"input_size {model.input_size}\n"
              f"seed {model.seed}\n"
              f"layers {layers}\n"
              f"end\n")
    flat = np.concatenate([p.ravel() for p in model.params()]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(flat.tobytes())


def load_model(path) -> SegModel:
    data = Path(path).read_bytes()
    end = data.index(b"end\n") + 4
    lines = data[:end].decode("ascii").splitlines()
    magic, version = lines[0].split()
    if magic != HEADER_MAGIC or int(version) != HEADER_VERSION:
        raise SegmentationError(f"unsupported model header {lines[0]!r}")
    fields = dict(ln.split(" ", 1) for ln in lines[1:-1])
    arch = [tuple(int(v) for v in spec.split(":")[1:]) for spec in fields["layers"].split(",")]
    flat = np.frombuffer(data[end:], dtype="<f8")
    weights, biases, pos = [], [], 0
    for cin, cout in arch:
        n = cout * cin * 9
        weights.append(flat[pos:pos + n].reshape(cout, cin, 3, 3).copy())
        pos += n
        biases.append(flat[pos:pos + cout].copy())
        pos += cout
    if pos != flat.size:
        raise SegmentationError(f"model file has {flat.size} values, architecture needs {pos}")
    return SegModel(weights, biases, int(fields["input_size"]), int(fields["seed"]))
