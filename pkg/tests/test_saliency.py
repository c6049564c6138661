import math

import numpy as np
import pytest

from sslt import saliency
from sslt.saliency import (SaliencyConfig, SaliencyError, binarize, salient_area, saliency_map,
                           select_pseudo_label)


def test_constant_crop_is_all_zero():
    assert np.all(saliency_map(np.full((40, 50, 3), 0.6)) == 0)


@pytest.mark.parametrize("y0,x0", [(30, 20), (10, 10), (40, 50), (5, 66)])
def test_bright_square_argmax_inside_dilated_square(y0, x0):
    # 80x60 crop: at exactly the working width an 8 px square has exact
    # spectral zeros and the map develops periodic replicas (the reference
    # OpenCV formulation does the same).
    img = np.full((60, 80), 0.1)
    img[y0:y0 + 8, x0:x0 + 8] = 0.9
    p = saliency_map(img)
    r = math.ceil(3 * 2.5)
    y, x = np.unravel_index(np.argmax(p), p.shape)
    assert y0 - r <= y < y0 + 8 + r and x0 - r <= x < x0 + 8 + r


def test_matches_opencv_formulation(rng):
    cv2 = pytest.importorskip("cv2")
    g = rng.random((48, 64))
    c = cv2.dft(g, flags=cv2.DFT_COMPLEX_OUTPUT)
    z = c[..., 0] + 1j * c[..., 1]
    lm = np.log(np.abs(z) + 1e-12)
    res = np.exp(lm - cv2.boxFilter(lm, -1, (3, 3), borderType=cv2.BORDER_REPLICATE)) * np.exp(1j * np.angle(z))
    inv = cv2.idft(np.dstack([res.real, res.imag]), flags=cv2.DFT_SCALE)
    s = inv[..., 0] ** 2 + inv[..., 1] ** 2
    s = cv2.GaussianBlur(s, (17, 17), 2.5, borderType=cv2.BORDER_REPLICATE)
    s = (s - s.min()) / (s.max() - s.min())
    assert np.abs(saliency_map(g) - s).max() < 1e-9


def test_range(rng):
    for _ in range(5):
        p = saliency_map(rng.random((int(rng.integers(16, 90)), int(rng.integers(16, 90)), 3)))
        assert p.min() >= 0 and p.max() <= 1


def test_too_small():
    with pytest.raises(SaliencyError):
        saliency_map(np.zeros((10, 40)))


def test_binarize_examples():
    p = np.array([[0, 0.5], [0.7, 0]])
    assert binarize(p, SaliencyConfig(binarize_mode="literal-nonzero")).tolist() == [[False, True], [True, False]]
    for mode in ("literal-nonzero", "relative-threshold"):
        assert not binarize(np.zeros((3, 3)), SaliencyConfig(binarize_mode=mode)).any()
    assert binarize(np.array([0.1, 1.0])).tolist() == [False, True]


def test_binarize_scale_invariant(rng):
    p = rng.random((20, 20))
    assert np.array_equal(binarize(p), binarize(3.7 * p))


def test_salient_area(rng):
    m = np.zeros((3, 3), dtype=bool)
    m.flat[[0, 2, 4, 8]] = True
    assert salient_area(m) == 4
    assert salient_area(np.zeros((4, 5), dtype=bool)) == 0
    assert salient_area(np.ones((4, 5), dtype=bool)) == 20
    r = rng.random((17, 13)) > 0.5
    assert salient_area(r) == sum(bool(v) for v in r.flat)


@pytest.fixture
def area_backend(monkeypatch):
    """A backend whose salient area is encoded in the crop's pixel value."""

    def fake(gray, cfg):
        out = np.zeros(gray.shape)
        out.flat[:int(round(gray[0, 0] * 1000))] = 1.0
        return out

    monkeypatch.setitem(saliency.BACKENDS, "area", fake)
    return SaliencyConfig(backend="area")


def crops_with_areas(areas, indices):
    return [(i, None, np.full((20, 20), a / 1000)) for a, i in zip(areas, indices)]


def test_select_max_with_earliest_tie(area_backend):
    pl = select_pseudo_label(crops_with_areas([5, 80, 80, 3], [2, 7, 9, 11]), area_backend)
    assert pl.frame_index == 7 and pl.area == 80 == salient_area(pl.mask)


def test_select_uses_all_when_fewer_than_k(area_backend, monkeypatch):
    seen = []
    fake = saliency.BACKENDS["area"]
    monkeypatch.setitem(saliency.BACKENDS, "area", lambda g, c: seen.append(g[0, 0]) or fake(g, c))
    select_pseudo_label(crops_with_areas([1, 2, 3, 4], range(4)), area_backend)
    assert len(seen) == 4


def test_select_deterministic_and_maximal(area_backend, rng):
    areas = [int(a) for a in rng.integers(1, 300, size=25)]
    crops = crops_with_areas(areas, range(25))
    a = select_pseudo_label(crops, area_backend)
    b = select_pseudo_label(crops, area_backend)
    assert (a.frame_index, a.area) == (b.frame_index, b.area)
    assert a.area <= max(areas)


def test_select_all_empty(area_backend):
    with pytest.raises(SaliencyError):
        select_pseudo_label(crops_with_areas([0, 0], [0, 1]), area_backend)
    with pytest.raises(SaliencyError):
        select_pseudo_label([], area_backend)
