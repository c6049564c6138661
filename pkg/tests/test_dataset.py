import numpy as np
import pytest

from sslt.dataset import (CHALLENGE_TABLE, DatasetError, SynthConfig, constant_motion, discover_sequences,
                          generate_synthetic, load_sequence, parse_box_line, split_challenge_suite,
                          synthesize, write_sequence)
from sslt.geometry import Box, tight_box


def brute_tight(mask):
    ys, xs = [], []
    for i in range(mask.shape[0]):
        for j in range(mask.shape[1]):
            if mask[i, j]:
                ys.append(i)
                xs.append(j)
    return min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1


def small_cfg(**kw):
    base = dict(n_frames=5, width=96, height=72, polygon=[[-12, -8], [12, -8], [12, 8], [-12, 8]],
                start_center=(40.0, 36.0))
    base.update(kw)
    return SynthConfig(**base)


def test_parse_box_line():
    assert parse_box_line("10,20,30,40", 1) == Box(10, 20, 30, 40)
    with pytest.raises(DatasetError, match="line 3"):
        parse_box_line("1,2,3", 3)


def test_static_and_translation():
    _, gt = synthesize(small_cfg())
    assert len({b.as_tuple() for b in gt.boxes}) == 1
    _, gt = synthesize(small_cfg(motion=constant_motion(5, dx=2.0)))
    xs = [b.x for b in gt.boxes]
    assert np.allclose(np.diff(xs), 2.0)
    assert len({(b.y, b.w, b.h) for b in gt.boxes}) == 1


def test_gt_box_is_tight_box_of_mask():
    seq, gt = synthesize(small_cfg(motion=constant_motion(5, dx=1.3, dy=-0.7, rotation=5.0), deformation=2.0))
    for b, m in zip(gt.boxes, gt.masks):
        assert b.as_tuple() == tuple(float(v) for v in brute_tight(m))
        assert tight_box(m) == brute_tight(m)


def test_byte_identical(tmp_path):
    cfg = small_cfg(background="clutter", noise_sigma=0.02, seed=9)
    generate_synthetic(cfg, tmp_path / "a")
    generate_synthetic(cfg, tmp_path / "b")
    for sub in ("frames", "masks"):
        for p in sorted((tmp_path / "a" / sub).iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / sub / p.name).read_bytes()
    assert (tmp_path / "a" / "groundtruth.txt").read_bytes() == (tmp_path / "b" / "groundtruth.txt").read_bytes()


def test_loader_round_trip(tmp_path):
    seq, gt = generate_synthetic(small_cfg(background="drifting-texture"), tmp_path / "s")
    lseq, lgt = load_sequence(tmp_path / "s")
    assert all(np.array_equal(a, b) for a, b in zip(seq.frames, lseq.frames))
    assert [b.as_tuple() for b in lgt.boxes] == [b.as_tuple() for b in gt.boxes]
    assert all(np.array_equal(a, b) for a, b in zip(gt.masks, lgt.masks))
    assert discover_sequences(tmp_path) == [tmp_path / "s"]


def test_count_mismatch(tmp_path):
    seq, gt = synthesize(small_cfg())
    gt.boxes = gt.boxes[:4]
    gt.masks = None
    write_sequence(seq, gt, tmp_path / "s")
    with pytest.raises(DatasetError, match="4 boxes for 5 frames"):
        load_sequence(tmp_path / "s")


def test_missing_frame(tmp_path):
    generate_synthetic(small_cfg(), tmp_path / "s")
    (tmp_path / "s" / "frames" / "000003.png").unlink()
    with pytest.raises(DatasetError, match="not contiguous"):
        load_sequence(tmp_path / "s")


def test_target_escape_names_frame():
    with pytest.raises(DatasetError, match="frame 5"):
        synthesize(small_cfg(motion=constant_motion(5, dx=12.0)))


def test_challenge_suite_rows():
    cfgs = split_challenge_suite(0)
    assert [c.name for c in cfgs] == [f"seq0{i}" for i in range(1, 8)]
    by = {c.name: c for c in cfgs}

    def spins(c):
        return any(s[2] != 0 for s in c.steps())

    def scales(c):
        return any(s[3] != 1 for s in c.steps())

    assert scales(by["seq01"]) and not spins(by["seq01"])
    assert spins(by["seq06"]) and scales(by["seq06"]) and by["seq06"].background != "flat"
    assert spins(by["seq07"]) and not scales(by["seq07"]) and by["seq07"].deformation == 0
    for name, (spin, deform, scale, bg, illum) in CHALLENGE_TABLE.items():
        c = by[f"seq{name}"]
        assert (spins(c), c.deformation > 0, scales(c), c.background != "flat", c.gain_end != c.gain_start) \
            == (spin, deform, scale, bg, illum)
    assert [c.to_dict() for c in split_challenge_suite(0)] == [c.to_dict() for c in cfgs]
