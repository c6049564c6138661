import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslt.geometry import (Box, box_iou, clamp_min, clip_box, expand, is_salient_box, refine_from_mask,
                           tight_box)

coord = st.floats(-500, 1500, allow_nan=False)
side = st.floats(0.5, 2000, allow_nan=False)


def test_box_validation():
    with pytest.raises(ValueError):
        Box(0, 0, 0, 5)
    with pytest.raises(ValueError):
        Box(float("nan"), 0, 1, 1)
    assert Box(10, 10, 20, 20).center == (20, 20)


def test_expand_examples():
    assert expand(Box(100, 50, 40, 20), 1.5) == Box(90, 45, 60, 30)
    assert expand(Box(0, 0, 10, 10), 2) == Box(-5, -5, 20, 20)
    b = Box(3.3, 4.4, 5.5, 6.6)
    assert expand(b, 1) == b


def test_clamp_examples():
    assert clamp_min(Box(90, 45, 60, 30), (640, 512), 96) == Box(90, 45, 96, 96)
    assert clamp_min(Box(-5, -5, 20, 20), (640, 512), 96) == Box(0, 0, 96, 96)
    assert clamp_min(Box(600, 400, 700, 600), (640, 512), 96) == Box(0, 0, 640, 512)
    with pytest.raises(ValueError):
        clamp_min(Box(0, 0, 10, 10), (50, 40), 60)


@settings(max_examples=300, deadline=None)
@given(coord, coord, side, side, st.floats(1, 4))
def test_expand_properties(x, y, w, h, s):
    b = Box(x, y, w, h)
    e = expand(b, s)
    assert abs(e.center[0] - b.center[0]) < 1e-9 and abs(e.center[1] - b.center[1]) < 1e-9
    assert e.area == pytest.approx(s * s * b.area, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(coord, coord, side, side, st.integers(8, 1280), st.integers(8, 1024), st.floats(0, 1))
def test_clamp_properties(x, y, w, h, W, H, frac):
    tr = 1 + frac * (min(W, H) - 1)
    t = clamp_min(Box(x, y, w, h), (W, H), tr)
    assert t.x >= 0 and t.y >= 0 and t.x + t.w <= W and t.y + t.h <= H
    assert t.w >= min(tr, W) and t.h >= min(tr, H)


@settings(max_examples=200, deadline=None)
@given(st.integers(50, 400), st.integers(50, 400), st.data())
def test_clamp_identity_when_nothing_to_do(W, H, data):
    tr = data.draw(st.floats(1, min(W, H)))
    w = data.draw(st.floats(tr, W))
    h = data.draw(st.floats(tr, H))
    x = data.draw(st.floats(0, W - w))
    y = data.draw(st.floats(0, H - h))
    b = Box(x, y, w, h)
    assert clamp_min(b, (W, H), tr) == b


def test_refine_examples():
    m = np.zeros((10, 12), dtype=bool)
    m[2:6, 3:8] = True
    assert refine_from_mask(m, (10, 20)) == Box(13, 22, 5, 4)
    one = np.zeros((5, 5), dtype=bool)
    one[3, 1] = True
    assert refine_from_mask(one, (7, 9)) == Box(8, 12, 1, 1)
    assert refine_from_mask(np.ones((6, 9), dtype=bool)) == Box(0, 0, 9, 6)
    assert tight_box(np.zeros((3, 3), dtype=bool)) is None
    with pytest.raises(ValueError):
        refine_from_mask(np.zeros((3, 3), dtype=bool))


def test_is_salient():
    assert is_salient_box(Box(0, 0, 100, 100), 32)
    assert not is_salient_box(Box(0, 0, 100, 20), 32)
    assert is_salient_box(Box(0, 0, 32, 32), 32)


def test_iou():
    assert box_iou(Box(0, 0, 2, 2), Box(1, 1, 2, 2)) == pytest.approx(1 / 7)
    assert box_iou(Box(0, 0, 2, 2), Box(5, 5, 2, 2)) == 0
    assert box_iou(Box(1, 2, 3, 4), Box(1, 2, 3, 4)) == 1


@settings(max_examples=200, deadline=None)
@given(coord, coord, side, side)
def test_clip_box_inside(x, y, w, h):
    c = clip_box(Box(x, y, w, h), (320, 240))
    assert c.x >= 0 and c.y >= 0 and c.x + c.w <= 320 + 1e-9 and c.y + c.h <= 240 + 1e-9
