import json

import numpy as np
import pytest

from sslt.dataset import GroundTruth, Sequence, write_sequence
from sslt.evaluate import EvalError, evaluate_run
from sslt.geometry import Box
from sslt.imaging import write_mask
from sslt.metrics import SegReport
from sslt.pipeline import boxes_csv


def make_gt(root, name, n=4):
    mask = np.zeros((30, 40), dtype=bool)
    mask[5:15, 10:20] = True
    frames = [np.full((30, 40, 3), 0.2) for _ in range(n)]
    gt = GroundTruth([Box(10, 5, 10, 10)] * n, [mask] * n)
    write_sequence(Sequence(name, frames), gt, root / name)
    return gt


def write_pred(root, name, boxes, masks, fps=5.0):
    d = root / name
    (d / "masks").mkdir(parents=True)
    (d / "boxes.csv").write_text(boxes_csv(boxes, ["seg-refined"] * len(boxes)))
    for i, m in enumerate(masks, start=1):
        write_mask(d / "masks" / f"{i:06d}.png", m)
    (d / "result.json").write_text(json.dumps({"fps": {"with_finetune": fps, "without_finetune": 2 * fps}}))


def test_ground_truth_as_prediction(tmp_path):
    gt = make_gt(tmp_path / "data", "a")
    write_pred(tmp_path / "res", "a", gt.boxes, gt.masks)
    report, precision, success = evaluate_run(tmp_path / "res", tmp_path / "data")
    assert report.s_measure == pytest.approx(1.0) and report.j_mean == 1 and report.f_mean == 1
    assert all(v == 1 for t, v in zip(precision.thresholds, precision.values) if t > 0)
    assert all(v == 1 for t, v in zip(success.thresholds, success.values) if t < 1)
    metrics = json.loads((tmp_path / "res" / "metrics.json").read_text())
    assert set(metrics) == set(SegReport.__dataclass_fields__) | {"precision_curve", "success_curve"}
    assert metrics["fps"] == 5.0
    lines = (tmp_path / "res" / "success_curve.csv").read_text().splitlines()
    assert lines[0] == "threshold,value" and lines[1] == "0.000000,1.000000"


def test_macro_average(tmp_path):
    for name, keep in (("a", 40), ("b", 80)):
        gt = make_gt(tmp_path / "data", name)
        pred = np.zeros((30, 40), dtype=bool)
        pred[5:15, 10:20].flat[:keep] = True
        write_pred(tmp_path / "res", name, gt.boxes, [pred] * 4)
    report, _, _ = evaluate_run(tmp_path / "res", tmp_path / "data", workers=2, out_dir=tmp_path / "ev")
    assert report.j_mean == pytest.approx(0.6)
    detail = json.loads((tmp_path / "ev" / "metrics_detail.json").read_text())
    assert detail["sequences"]["a"]["j_mean"] == pytest.approx(0.4)


def test_missing_artifacts_enumerated(tmp_path):
    gt = make_gt(tmp_path / "data", "a")
    make_gt(tmp_path / "data", "b")
    write_pred(tmp_path / "res", "a", gt.boxes, gt.masks)
    write_pred(tmp_path / "res", "b", gt.boxes, gt.masks)
    (tmp_path / "res" / "a" / "boxes.csv").unlink()
    (tmp_path / "res" / "b" / "masks" / "000002.png").unlink()
    with pytest.raises(EvalError) as exc:
        evaluate_run(tmp_path / "res", tmp_path / "data")
    assert len(exc.value.problems) == 2
    with pytest.raises(EvalError):
        evaluate_run(tmp_path / "nothing", tmp_path / "data")
