"""End-to-end run over one sequence: track, pseudo-label, fine-tune, segment, fuse.

The run is two-pass. Pass 1 tracks every frame and fixes the crop boxes; the
salient/non-salient decision needs all of them. Pass 2 trains the segmenter on
the selected pseudo-label and segments every crop.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig, to_dict
from .dataset import Sequence
from .geometry import (Box, box_inside, clamp_min, expand, is_salient_box,
                       refine_from_mask)
from .imaging import raster_box, write_mask
from .saliency import SaliencyConfig, SaliencyError, select_pseudo_label
from .segment import TrainConfig, fine_tune, init_model, segment_crop
from .tracker import TrackerError, recenter, track_init, track_step

log = logging.getLogger(__name__)

SEG_REFINED = "seg-refined"
TRACKER_FALLBACK = "tracker-fallback"
TRACKER_NONSALIENT = "tracker-nonsalient"
TIMING_KEYS = ("timings", "fps")


@dataclass
class FrameResult:
    index: int
    f0: Box
    ft: Box
    mask: np.ndarray
    box: Box
    source: str
    timings: dict = field(default_factory=dict)


@dataclass
class SequenceResult:
    name: str
    salient: bool
    pseudo_label: dict | None
    frames: list
    timings: dict
    fps_with_finetune: float
    fps_without_finetune: float
    config: dict
    seed: int
    diagnostics: list = field(default_factory=list)

    @property
    def boxes(self) -> list[Box]:
        return [fr.box for fr in self.frames]

    def source_counts(self) -> dict[str, int]:
        counts = {SEG_REFINED: 0, TRACKER_FALLBACK: 0, TRACKER_NONSALIENT: 0}
        for fr in self.frames:
            counts[fr.source] += 1
        return counts


def derive_seed(master: int, component: int, stream: int) -> int:
    return int(np.random.SeedSequence([master, component, stream]).generate_state(1)[0])


def raster_region(box: Box, shape) -> np.ndarray:
    x, y, w, h = raster_box(box, shape)
    region = np.zeros(shape[:2], dtype=bool)
    region[y:y + h, x:x + w] = True
    return region


def fuse_frame(f0: Box, ft: Box, mask: np.ndarray, salient: bool, frame_size):
    """Combine tracker box and full-frame segmentation mask for one frame.

    Returns ``(box, mask, source)``.
    """
    width, height = frame_size
    if not salient:
        return f0, mask & raster_region(f0, (height, width)), TRACKER_NONSALIENT
    if not mask.any():
        return f0, np.zeros_like(mask), TRACKER_FALLBACK
    return refine_from_mask(mask), mask, SEG_REFINED


def decide_salient(f0s, cfg: PipelineConfig) -> bool:
    small = sum(not is_salient_box(b, cfg.geometry.salient_size) for b in f0s)
    if cfg.salient_policy == "any-frame":
        return small == 0
    return small / len(f0s) < cfg.salient_fraction


def _crop_box(f0: Box, frame_size, cfg: PipelineConfig) -> Box:
    g = cfg.geometry
    tr = min(g.min_size, *frame_size)
    return clamp_min(expand(f0, g.expand_factor), frame_size, tr)


def _segment_in_frame(model, frame, ft: Box, threshold: float) -> np.ndarray:
    x, y, w, h = raster_box(ft, frame.shape)
    full = np.zeros(frame.shape[:2], dtype=bool)
    full[y:y + h, x:x + w] = segment_crop(model, frame[y:y + h, x:x + w], threshold)
    return full


def segment_full_frame(model, frame, ft: Box, threshold: float) -> np.ndarray:
    """Segment the whole frame at the pixel scale the model sees inside ``ft``.

    This is the cost a whole-image segmenter pays for the same detail; it is
    used to measure what cropping saves.
    """
    x, y, w, h = raster_box(ft, frame.shape)
    s = model.input_size
    size = (max(1, round(frame.shape[1] * s / w)), max(1, round(frame.shape[0] * s / h)))
    return segment_crop(model, frame, threshold, size=size)


def track_pass(frames, init_box: Box, cfg: PipelineConfig) -> tuple[list[Box], float]:
    t0 = time.perf_counter()
    state = track_init(frames[0], init_box, cfg.tracker)
    f0s = [init_box]
    for frame in frames[1:]:
        box, state = track_step(state, frame)
        f0s.append(box)
    return f0s, time.perf_counter() - t0


def run_sequence(seq: Sequence, init_box: Box, cfg: PipelineConfig | None = None) -> SequenceResult:
    cfg = cfg or PipelineConfig()
    cfg.validate()
    frames = seq.frames
    size = seq.frame_size
    n = len(frames)
    H, W = frames[0].shape[:2]
    if not box_inside(init_box, size):
        raise TrackerError(f"initial box {init_box.as_tuple()} is not inside frame 1")

    timings = {}
    t_start = time.perf_counter()
    f0s, timings["track"] = track_pass(frames, init_box, cfg)
    fts = [_crop_box(b, size, cfg) for b in f0s]
    salient = decide_salient(f0s, cfg)

    diagnostics = []
    sal_cfg = SaliencyConfig(**{**to_dict(cfg.saliency), "seed": derive_seed(cfg.seed, cfg.saliency.seed, 1)})
    t0 = time.perf_counter()
    try:
        crops = [(i, ft, frames[i][_slices(ft, frames[i].shape)]) for i, ft in enumerate(fts)]
        pseudo = select_pseudo_label(crops, sal_cfg)
    except SaliencyError as exc:
        pseudo = None
        diagnostics.append(f"pseudo-label selection failed: {exc}; tracker-only output")
        log.warning("%s: %s", seq.name, diagnostics[-1])
    timings["pseudo_label"] = time.perf_counter() - t0

    if pseudo is None:
        results = [FrameResult(i, f0s[i], fts[i], np.zeros((H, W), dtype=bool), f0s[i], TRACKER_FALLBACK)
                   for i in range(n)]
        timings["fine_tune"] = timings["segment"] = 0.0
        return _finish(seq, cfg, salient, None, results, timings, t_start, diagnostics)

    t0 = time.perf_counter()
    train_cfg = TrainConfig(**{**to_dict(cfg.train), "seed": derive_seed(cfg.seed, cfg.train.seed, 2)})
    model = init_model(derive_seed(cfg.seed, cfg.train.seed, 3))
    pseudo_crop = crops[[c[0] for c in crops].index(pseudo.frame_index)][2]
    model = fine_tune(model, pseudo.mask, pseudo_crop, train_cfg)
    timings["fine_tune"] = time.perf_counter() - t0
    pseudo_record = {
        "frame": pseudo.frame_index + 1,
        "crop_box": list(pseudo.crop_box.as_tuple()),
        "area": pseudo.area,
        "final_loss": model.loss_trace[-1],
    }

    t0 = time.perf_counter()
    if cfg.feedback == "refine-feeds-tracker" and salient:
        results = _feedback_pass(frames, init_box, model, salient, cfg)
    else:
        results = []
        for i in range(n):
            ts = time.perf_counter()
            mask = _segment_in_frame(model, frames[i], fts[i], cfg.train.threshold)
            tf = time.perf_counter()
            box, mask, source = fuse_frame(f0s[i], fts[i], mask, salient, size)
            results.append(FrameResult(i, f0s[i], fts[i], mask, box, source,
                                       {"segment": tf - ts, "fuse": time.perf_counter() - tf}))
    timings["segment"] = time.perf_counter() - t0
    return _finish(seq, cfg, salient, pseudo_record, results, timings, t_start, diagnostics)


def _slices(box: Box, shape):
    x, y, w, h = raster_box(box, shape)
    return slice(y, y + h), slice(x, x + w)


def _feedback_pass(frames, init_box, model, salient, cfg):
    """Second tracking pass in which each refined box re-centres the tracker."""
    size = (frames[0].shape[1], frames[0].shape[0])
    state = track_init(frames[0], init_box, cfg.tracker)
    results = []
    for i, frame in enumerate(frames):
        ts = time.perf_counter()
        if i == 0:
            f0 = init_box
        else:
            f0, state = track_step(state, frame)
        ft = _crop_box(f0, size, cfg)
        mask = _segment_in_frame(model, frame, ft, cfg.train.threshold)
        tf = time.perf_counter()
        box, mask, source = fuse_frame(f0, ft, mask, salient, size)
        if source == SEG_REFINED and i > 0:
            state = recenter(state, box.center)
        results.append(FrameResult(i, f0, ft, mask, box, source,
                                   {"segment": tf - ts, "fuse": time.perf_counter() - tf}))
    return results


def _finish(seq, cfg, salient, pseudo_record, results, timings, t_start, diagnostics) -> SequenceResult:
    total = time.perf_counter() - t_start
    timings["total"] = total
    n = len(results)
    without = max(total - timings.get("fine_tune", 0.0), 1e-12)
    return SequenceResult(
        name=seq.name,
        salient=salient,
        pseudo_label=pseudo_record,
        frames=results,
        timings=timings,
        fps_with_finetune=n / max(total, 1e-12),
        fps_without_finetune=n / without,
        config=to_dict(cfg),
        seed=cfg.seed,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------- output

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def boxes_csv(boxes, sources) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "x", "y", "w", "h", "source"])
    for i, (b, s) in enumerate(zip(boxes, sources), start=1):
        w.writerow([i, *(_fmt(v) for v in b.as_tuple()), s])
    return buf.getvalue()


def read_boxes_csv(path) -> tuple[list[Box], list[str]]:
    boxes, sources = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["frame", "x", "y", "w", "h", "source"]:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            boxes.append(Box(float(row["x"]), float(row["y"]), float(row["w"]), float(row["h"])))
            sources.append(row["source"])
    return boxes, sources


def result_json(result: SequenceResult) -> dict:
    return {
        "sequence": result.name,
        "frames": len(result.frames),
        "salient": result.salient,
        "pseudo_label": result.pseudo_label,
        "sources": result.source_counts(),
        "trajectory": [{"frame": fr.index + 1,
                        "f0": [round(v, 6) for v in fr.f0.as_tuple()],
                        "ft": [round(v, 6) for v in fr.ft.as_tuple()]} for fr in result.frames],
        "diagnostics": result.diagnostics,
        "seed": result.seed,
        "config": result.config,
        "timings": result.timings,
        "fps": {"with_finetune": result.fps_with_finetune,
                "without_finetune": result.fps_without_finetune},
    }


def write_result(result: SequenceResult, out) -> Path:
    out = Path(out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    (out / "boxes.csv").write_text(
        boxes_csv(result.boxes, [fr.source for fr in result.frames]), encoding="utf-8", newline="\n")
    for fr in result.frames:
        write_mask(out / "masks" / f"{fr.index + 1:06d}.png", fr.mask)
    (out / "result.json").write_text(json.dumps(result_json(result), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8", newline="\n")
    return out


def tracker_only(seq: Sequence, init_box: Box, cfg: PipelineConfig | None = None) -> list[Box]:
    cfg = cfg or PipelineConfig()
    return track_pass(seq.frames, init_box, cfg)[0]


__all__ = [
    "FrameResult", "SequenceResult", "run_sequence", "fuse_frame", "decide_salient",
    "write_result", "read_boxes_csv", "boxes_csv", "tracker_only",
]
