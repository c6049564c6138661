"""Sequence loading and synthetic satellite sequence generation.

On-disk layout of a sequence directory::

    <dir>/frames/000001.png ...
    <dir>/groundtruth.txt        one "x,y,w,h" line per frame
    <dir>/masks/000001.png ...   optional, {0, 255}
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Box, tight_box
from .imaging import gaussian_blur, quantize, read_mask, read_png, write_mask, write_png

FRAME_RE = re.compile(r"^(\d{6})\.png$")
SUPERSAMPLE = 4


class DatasetError(ValueError):
    pass


@dataclass
class Sequence:
    name: str
    frames: list
    frame_paths: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) < 2:
            raise DatasetError(f"sequence {self.name!r} needs at least 2 frames")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise DatasetError(f"frame {i + 1} has shape {f.shape}, expected {shape}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_size(self) -> tuple[int, int]:
        return self.frames[0].shape[1], self.frames[0].shape[0]


@dataclass
class GroundTruth:
    boxes: list
    masks: list | None = None


def _frame_name(i: int) -> str:
    return f"{i:06d}.png"


def parse_box_line(line: str, lineno: int) -> Box:
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise DatasetError(f"groundtruth line {lineno}: expected 'x,y,w,h', got {line.strip()!r}")
    try:
        vals = [float(p) for p in parts]
        return Box(*vals)
    except ValueError as exc:
        raise DatasetError(f"groundtruth line {lineno}: {exc}") from None


def format_box_line(box: Box) -> str:
    return ",".join(f"{v:g}" for v in box.as_tuple())


def _indexed_pngs(d: Path, what: str) -> list[Path]:
    found = {}
    for p in d.iterdir():
        m = FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise DatasetError(f"no {what} found in {d}")
    idx = sorted(found)
    expected = list(range(1, len(idx) + 1))
    if idx != expected:
        missing = sorted(set(expected) - set(idx))
        raise DatasetError(f"{what} indices in {d} are not contiguous from 1 (missing {missing[:5]})")
    return [found[i] for i in idx]


def load_ground_truth(path, n_frames: int | None = None, frame_shape=None) -> GroundTruth:
    """Read groundtruth.txt and, when present, masks/ from a sequence directory."""
    root = Path(path)
    gt_file = root / "groundtruth.txt"
    if not gt_file.is_file():
        raise DatasetError(f"missing {gt_file}")
    lines = gt_file.read_text(encoding="utf-8").splitlines()
    boxes = [parse_box_line(ln, i + 1) for i, ln in enumerate(lines) if ln.strip()]
    if n_frames is not None and len(boxes) != n_frames:
        raise DatasetError(f"{gt_file}: {len(boxes)} boxes for {n_frames} frames")

    masks = None
    mask_dir = root / "masks"
    if mask_dir.is_dir():
        mpaths = _indexed_pngs(mask_dir, "masks")
        if len(mpaths) != len(boxes):
            raise DatasetError(f"{mask_dir}: {len(mpaths)} masks for {len(boxes)} frames")
        masks = []
        for p in mpaths:
            m = read_mask(p)
            if frame_shape is not None and m.shape != tuple(frame_shape[:2]):
                raise DatasetError(f"mask {p.name} has shape {m.shape}, frames are {tuple(frame_shape[:2])}")
            masks.append(m)
    return GroundTruth(boxes, masks)


def load_sequence(path) -> tuple[Sequence, GroundTruth]:
    root = Path(path)
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise DatasetError(f"missing frames directory {frames_dir}")
    paths = _indexed_pngs(frames_dir, "frames")
    frames = [read_png(p) for p in paths]
    seq = Sequence(root.name, frames, [str(p) for p in paths])
    return seq, load_ground_truth(root, len(frames), frames[0].shape)


def discover_sequences(path) -> list[Path]:
    """A sequence directory itself, or the sorted sequence directories under a root."""
    root = Path(path)
    if (root / "frames").is_dir():
        return [root]
    found = sorted(p for p in root.iterdir() if (p / "frames").is_dir()) if root.is_dir() else []
    if not found:
        raise DatasetError(f"no sequences found under {root}")
    return found


# ------------------------------------------------------------ synthesis

@dataclass
class SynthConfig:
    """Synthetic sequence description.

    The motion script lists one ``(dx, dy, rotation_deg, scale_ratio)`` step per
    frame transition (length ``n_frames - 1``); each step is applied
    cumulatively. Polygon vertices are in target-local pixels about the centre.
    """

    name: str = "synth"
    n_frames: int = 40
    width: int = 320
    height: int = 240
    polygon: list = field(default_factory=lambda: [[-30, -10], [30, -10], [30, 10], [-30, 10]])
    start_center: tuple = (160.0, 120.0)
    start_angle: float = 0.0
    texture_seed: int = 0
    target_color: tuple = (0.85, 0.8, 0.6)
    motion: list = field(default_factory=list)
    deformation: float = 0.0
    background: str = "flat"
    background_level: float = 0.08
    gain_start: float = 1.0
    gain_end: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def steps(self) -> list[tuple[float, float, float, float]]:
        if not self.motion:
            return [(0.0, 0.0, 0.0, 1.0)] * (self.n_frames - 1)
        return [tuple(float(v) for v in s) for s in self.motion]

    def gains(self) -> np.ndarray:
        return np.linspace(self.gain_start, self.gain_end, self.n_frames)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        return cls(**d)


def constant_motion(n_frames: int, dx=0.0, dy=0.0, rotation=0.0, scale=1.0) -> list:
    return [[dx, dy, rotation, scale] for _ in range(n_frames - 1)]


def _poses(cfg: SynthConfig) -> list[tuple[float, float, float, float]]:
    cx, cy = cfg.start_center
    ang, sc = cfg.start_angle, 1.0
    poses = [(cx, cy, ang, sc)]
    for dx, dy, dr, ds in cfg.steps():
        cx, cy, ang, sc = cx + dx, cy + dy, ang + dr, sc * ds
        poses.append((cx, cy, ang, sc))
    return poses


def _vertex_jitter(cfg: SynthConfig) -> np.ndarray:
    poly = np.asarray(cfg.polygon, dtype=np.float64)
    rng = np.random.default_rng([cfg.seed, 1])
    if cfg.deformation <= 0:
        return np.zeros((cfg.n_frames,) + poly.shape)
    # Smooth in time so the shape breathes instead of flickering.
    raw = rng.uniform(-1, 1, size=(cfg.n_frames,) + poly.shape)
    t = np.arange(cfg.n_frames)[:, None, None]
    phase = rng.uniform(0, 2 * np.pi, size=poly.shape)
    # |jitter| <= deformation per vertex coordinate.
    return cfg.deformation * (0.8 * np.sin(0.25 * t + phase) + 0.2 * raw)


def frame_vertices(cfg: SynthConfig) -> list[np.ndarray]:
    poly = np.asarray(cfg.polygon, dtype=np.float64)
    jitter = _vertex_jitter(cfg)
    out = []
    for k, (cx, cy, ang, sc) in enumerate(_poses(cfg)):
        local = (poly + jitter[k]) * sc
        a = math.radians(ang)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        out.append(local @ rot.T + np.array([cx, cy]))
    return out


def validate_synth(cfg: SynthConfig) -> None:
    if cfg.n_frames < 2:
        raise DatasetError("n_frames must be >= 2")
    if len(cfg.steps()) != cfg.n_frames - 1:
        raise DatasetError(f"motion script has {len(cfg.steps())} steps, expected {cfg.n_frames - 1}")
    if any(s[3] <= 0 for s in cfg.steps()):
        raise DatasetError("scale ratios must be > 0")
    if cfg.gain_start <= 0 or cfg.gain_end <= 0:
        raise DatasetError("illumination gain must be > 0")
    if cfg.background not in ("flat", "clutter", "drifting-texture"):
        raise DatasetError(f"unknown background mode {cfg.background!r}")
    for k, v in enumerate(frame_vertices(cfg)):
        if (v[:, 0].min() < 1 or v[:, 1].min() < 1
                or v[:, 0].max() > cfg.width - 1 or v[:, 1].max() > cfg.height - 1):
            raise DatasetError(f"target leaves the frame at frame {k + 1}")


def _inside_polygon(px: np.ndarray, py: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over sample points."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue
        cond = (py >= min(y1, y2)) & (py < max(y1, y2))
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (px < xint)
    return inside


def _background(cfg: SynthConfig, k: int) -> np.ndarray:
    H, W = cfg.height, cfg.width
    base = np.empty((H, W, 3))
    base[:] = np.array([0.35, 0.45, 1.0]) * cfg.background_level
    if cfg.background == "flat":
        return base
    rng = np.random.default_rng([cfg.seed, 2])
    pad = 0 if cfg.background == "clutter" else 2 * cfg.n_frames
    noise = rng.standard_normal((H, W + pad))
    cloud = gaussian_blur(noise, 6.0)
    cloud = (cloud - cloud.min()) / (cloud.max() - cloud.min() + 1e-12)
    if cfg.background == "drifting-texture":
        cloud = cloud[:, 2 * k:2 * k + W]
    tint = np.array([0.55, 0.65, 0.8])
    return base + 0.35 * cloud[:, :, None] * tint


def _texture(cfg: SynthConfig, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Panel texture in target-local coordinates, so it turns with the target."""
    rng = np.random.default_rng([cfg.texture_seed, 3])
    cells = rng.uniform(0.65, 1.0, size=(32, 32))
    iu = np.floor(u / 7.0).astype(int) % 32
    iv = np.floor(v / 7.0).astype(int) % 32
    shade = cells[iv, iu]
    grid = (np.abs(np.mod(u, 7.0) - 3.5) > 3.0) | (np.abs(np.mod(v, 7.0) - 3.5) > 3.0)
    shade = np.where(grid, 0.55, shade)
    return shade[..., None] * np.asarray(cfg.target_color)


def render_frame(cfg: SynthConfig, k: int, verts: np.ndarray, pose) -> tuple[np.ndarray, np.ndarray]:
    """Anti-aliased frame ``k`` and its coverage >= 0.5 mask."""
    H, W = cfg.height, cfg.width
    s = SUPERSAMPLE
    x0 = max(0, int(math.floor(verts[:, 0].min())) - 1)
    x1 = min(W, int(math.ceil(verts[:, 0].max())) + 2)
    y0 = max(0, int(math.floor(verts[:, 1].min())) - 1)
    y1 = min(H, int(math.ceil(verts[:, 1].max())) + 2)
    sub = (np.arange(s) + 0.5) / s
    px = (np.arange(x0, x1)[:, None] + sub[None, :]).ravel()
    py = (np.arange(y0, y1)[:, None] + sub[None, :]).ravel()
    PY, PX = np.meshgrid(py, px, indexing="ij")
    inside = _inside_polygon(PX, PY, verts)

    cx, cy, ang, sc = pose
    a = math.radians(ang)
    dx, dy = PX - cx, PY - cy
    u = (math.cos(a) * dx + math.sin(a) * dy) / sc + 200.0
    v = (-math.sin(a) * dx + math.cos(a) * dy) / sc + 200.0
    tex = _texture(cfg, u, v) * cfg.gains()[k]

    hh, ww = y1 - y0, x1 - x0
    ins = inside.reshape(hh, s, ww, s)
    cov = ins.mean(axis=(1, 3))
    tex_sum = (tex * inside[..., None]).reshape(hh, s, ww, s, 3).sum(axis=(1, 3))
    tex_mean = tex_sum / np.maximum(ins.sum(axis=(1, 3)), 1)[..., None]

    frame = _background(cfg, k)
    region = frame[y0:y1, x0:x1]
    frame[y0:y1, x0:x1] = cov[..., None] * tex_mean + (1 - cov[..., None]) * region
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng([cfg.seed, 4, k])
        frame = frame + rng.normal(0.0, cfg.noise_sigma, frame.shape)
    mask = np.zeros((H, W), dtype=bool)
    mask[y0:y1, x0:x1] = cov >= 0.5
    return quantize(frame), mask


def synthesize(cfg: SynthConfig) -> tuple[Sequence, GroundTruth]:
    """Render a sequence in memory (8-bit quantized, identical to what is written)."""
    validate_synth(cfg)
    frames, masks, boxes = [], [], []
    for k, (verts, pose) in enumerate(zip(frame_vertices(cfg), _poses(cfg))):
        img, mask = render_frame(cfg, k, verts, pose)
        tb = tight_box(mask)
        if tb is None:
            raise DatasetError(f"target has no pixels at frame {k + 1}")
        frames.append(img)
        masks.append(mask)
        boxes.append(Box(*tb))
    return Sequence(cfg.name, frames), GroundTruth(boxes, masks)


def write_sequence(seq: Sequence, gt: GroundTruth, out) -> None:
    out = Path(out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(seq.frames, start=1):
        p = out / "frames" / _frame_name(i)
        write_png(p, img)
        paths.append(str(p))
    seq.frame_paths = paths
    with open(out / "groundtruth.txt", "w", encoding="utf-8", newline="\n") as fh:
        for b in gt.boxes:
            fh.write(format_box_line(b) + "\n")
    if gt.masks is not None:
        (out / "masks").mkdir(exist_ok=True)
        for i, m in enumerate(gt.masks, start=1):
            write_mask(out / "masks" / _frame_name(i), m)


def generate_synthetic(cfg: SynthConfig, out) -> tuple[Sequence, GroundTruth]:
    seq, gt = synthesize(cfg)
    write_sequence(seq, gt, out)
    return seq, gt


# Challenge flags per row: (spin, deformation, scale, background, illumination).
CHALLENGE_TABLE = {
    "01": (False, False, True, False, False),
    "02": (True, True, False, False, False),
    "03": (True, True, False, False, False),
    "04": (False, False, True, False, True),
    "05": (False, False, True, False, True),
    "06": (True, False, True, True, False),
    "07": (True, False, False, False, False),
}

# Convex outlines (body plus panels) in local pixels.
_SHAPES = [
    [[-44, -18], [44, -18], [50, 0], [44, 18], [-44, 18], [-50, 0]],
    [[-36, -22], [36, -22], [42, 0], [36, 22], [-36, 22], [-42, 0]],
    [[-40, -20], [22, -26], [44, 0], [22, 26], [-40, 20]],
]
# Net size change over the sequence for rows with scale change.
_SCALE_SPAN = {"01": 1.4, "04": 0.75, "05": 1.3, "06": 1.25}


def split_challenge_suite(seed: int = 0, n_frames: int = 40) -> list[SynthConfig]:
    """One config per challenge row; flags in CHALLENGE_TABLE."""
    rng = np.random.default_rng(seed)
    configs = []
    for k, (name, flags) in enumerate(CHALLENGE_TABLE.items()):
        spin, deform, scale, bg, illum = flags
        shape = _SHAPES[k % len(_SHAPES)]
        rot = float(rng.uniform(2.5, 3.5)) * (1 if k % 2 == 0 else -1) if spin else 0.0
        ratio = float(_SCALE_SPAN[name] ** (1.0 / (n_frames - 1))) if scale else 1.0
        dx = float(rng.uniform(0.6, 1.2)) * (1 if k % 2 == 0 else -1)
        dy = float(rng.uniform(-0.4, 0.4))
        start = (160.0 - dx * (n_frames - 1) / 2, 120.0 - dy * (n_frames - 1) / 2)
        configs.append(SynthConfig(
            name=f"seq{name}",
            n_frames=n_frames,
            width=320,
            height=240,
            polygon=[[float(a), float(b)] for a, b in shape],
            start_center=start,
            start_angle=float(rng.uniform(0, 20)),
            texture_seed=int(rng.integers(0, 2**31)),
            motion=constant_motion(n_frames, dx, dy, rot, ratio),
            deformation=4.0 if deform else 0.0,
            background="drifting-texture" if bg else "flat",
            gain_start=1.0,
            gain_end=0.5 if illum else 1.0,
            noise_sigma=0.01,
            seed=int(rng.integers(0, 2**31)),
        ))
    return configs
