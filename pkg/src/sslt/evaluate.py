"""Evaluate a directory of pipeline outputs against ground truth.

Expected layout::

    <results>/<sequence>/boxes.csv, masks/NNNNNN.png, result.json
    <data>/<sequence>/groundtruth.txt, masks/NNNNNN.png
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetError, _indexed_pngs, load_ground_truth
from .imaging import read_mask
from .metrics import (DP_THRESHOLDS, OP_THRESHOLDS, CurveReport, SegReport, dp_curve,
                      f_stats, j_stats, op_curve, s_measure)
from .pipeline import read_boxes_csv

PRECISION_CSV = "precision_curve.csv"
SUCCESS_CSV = "success_curve.csv"


class EvalError(RuntimeError):
    def __init__(self, problems: list[str]):
        super().__init__("evaluation inputs are incomplete:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class EvalConfig:
    dp_thresholds: tuple = tuple(DP_THRESHOLDS)
    op_thresholds: tuple = tuple(OP_THRESHOLDS)
    f_tolerance: float = 0.008
    fps_accounting: str = "with_finetune"


def _load_results(seq_dir: Path, problems: list[str]):
    boxes = masks = info = None
    try:
        boxes, _ = read_boxes_csv(seq_dir / "boxes.csv")
    except (OSError, ValueError, KeyError) as exc:
        problems.append(f"{seq_dir / 'boxes.csv'}: {exc}")
    try:
        masks = [read_mask(p) for p in _indexed_pngs(seq_dir / "masks", "masks")]
    except (OSError, DatasetError) as exc:
        problems.append(f"{seq_dir / 'masks'}: {exc}")
    try:
        info = json.loads((seq_dir / "result.json").read_text(encoding="utf-8"))
        info["fps"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        problems.append(f"{seq_dir / 'result.json'}: {exc!r}")
    return boxes, masks, info


def evaluate_sequence(boxes, masks, gt, fps: float, cfg: EvalConfig) -> dict:
    prec = dp_curve(boxes, gt.boxes, cfg.dp_thresholds)
    succ = op_curve(boxes, gt.boxes, cfg.op_thresholds)
    s = float(np.mean([s_measure(m.astype(np.float64), g) for m, g in zip(masks, gt.masks)]))
    jm, jr, jd = j_stats(masks, gt.masks)
    fm, fr, fd = f_stats(masks, gt.masks, cfg.f_tolerance)
    seg = SegReport(s, jm, jr, jd, fm, fr, fd, fps)
    return {"seg": seg, "precision": prec, "success": succ}


def _macro_curve(curves: list[CurveReport]) -> CurveReport:
    values = np.mean([c.values for c in curves], axis=0)
    return CurveReport(list(curves[0].thresholds), [float(v) for v in values],
                       float(np.mean([c.score_at_reference for c in curves])), float(values.mean()))


def _write_curve(path: Path, curve: CurveReport) -> None:
    lines = ["threshold,value"] + [f"{t:.6f},{v:.6f}" for t, v in zip(curve.thresholds, curve.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _evaluate_job(job):
    return evaluate_sequence(*job)


def evaluate_run(results_dir, data_dir, cfg: EvalConfig | None = None, out_dir=None, workers: int = 1):
    """Macro-average every metric over the sequences in ``results_dir``.

    Writes metrics.json, metrics_detail.json and the two curve CSVs into
    ``out_dir`` (default: ``results_dir``); returns
    ``(SegReport, precision CurveReport, success CurveReport)``.
    """
    cfg = cfg or EvalConfig()
    results_dir, data_dir = Path(results_dir), Path(data_dir)
    out_dir = Path(out_dir) if out_dir is not None else results_dir
    seq_dirs = sorted(p for p in results_dir.iterdir() if p.is_dir() and (p / "result.json").exists()) \
        if results_dir.is_dir() else []
    if not seq_dirs:
        raise EvalError([f"{results_dir}: no sequence results (no */result.json)"])

    problems: list[str] = []
    jobs = {}
    for sd in seq_dirs:
        boxes, masks, info = _load_results(sd, problems)
        try:
            gt = load_ground_truth(data_dir / sd.name)
        except (OSError, DatasetError) as exc:
            problems.append(f"{data_dir / sd.name}: {exc}")
            continue
        if gt.masks is None:
            problems.append(f"{data_dir / sd.name}: ground-truth masks are required")
            continue
        if boxes is None or masks is None or info is None:
            continue
        if len(boxes) != len(gt.boxes) or len(masks) != len(gt.masks):
            problems.append(f"{sd}: {len(boxes)} boxes / {len(masks)} masks for {len(gt.boxes)} frames")
            continue
        if masks[0].shape != gt.masks[0].shape:
            problems.append(f"{sd}: mask shape {masks[0].shape} vs ground truth {gt.masks[0].shape}")
            continue
        jobs[sd.name] = (boxes, masks, gt, float(info["fps"][cfg.fps_accounting]), cfg)
    if problems:
        raise EvalError(problems)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seq = dict(zip(jobs, pool.map(_evaluate_job, jobs.values())))
    else:
        per_seq = {name: _evaluate_job(job) for name, job in jobs.items()}

    names = sorted(per_seq)
    seg_fields = list(SegReport.__dataclass_fields__)
    report = SegReport(**{f: float(np.mean([getattr(per_seq[n]["seg"], f) for n in names]))
                          for f in seg_fields})
    precision = _macro_curve([per_seq[n]["precision"] for n in names])
    success = _macro_curve([per_seq[n]["success"] for n in names])

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_curve(out_dir / PRECISION_CSV, precision)
    _write_curve(out_dir / SUCCESS_CSV, success)
    metrics = asdict(report)
    metrics.update({"precision_curve": PRECISION_CSV, "success_curve": SUCCESS_CSV})
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8", newline="\n")
    detail = {
        "conventions": {
            "j_recall": "DAVIS: fraction of frames with J > 0.5",
            "f_recall": "DAVIS: fraction of frames with F > 0.5",
            "decay": "DAVIS-style: mean of first temporal quarter minus mean of last quarter",
            "f_tolerance": cfg.f_tolerance,
            "fps_accounting": cfg.fps_accounting,
            "aggregation": "macro average over sequences",
        },
        "dp_at_100": precision.score_at_reference,
        "precision_auc": precision.auc,
        "op_at_0.5": success.score_at_reference,
        "success_auc": success.auc,
        "sequences": {n: {**asdict(per_seq[n]["seg"]),
                          "dp_at_100": per_seq[n]["precision"].score_at_reference,
                          "precision_auc": per_seq[n]["precision"].auc,
                          "success_auc": per_seq[n]["success"].auc} for n in names},
    }
    (out_dir / "metrics_detail.json").write_text(json.dumps(detail, indent=2, sort_keys=True) + "\n",
                                                 encoding="utf-8", newline="\n")
    return report, precision, success
