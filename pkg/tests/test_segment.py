import math

import numpy as np
import pytest

from sslt.metrics import mask_iou
from sslt.segment import (ARCH, SegmentationError, TrainConfig, _forward_tensor, class_weights, coord_channels,
                          fine_tune, forward, init_model, load_model, loss_and_grad, save_model, segment_crop)


def zero_model(size=16):
    m = init_model(0, size)
    for w in m.weights:
        w[:] = 0
    return m


@pytest.fixture(scope="module")
def disc_fixture():
    yy, xx = np.mgrid[0:32, 0:32]
    label = (xx - 15.5) ** 2 + (yy - 15.5) ** 2 < 8 ** 2
    img = np.where(label[..., None], [0.8, 0.7, 0.5], [0.1, 0.1, 0.15])
    return img, label


def test_init_law_and_determinism():
    a, b = init_model(3), init_model(3)
    assert [w.shape for w in a.weights] == [(co, ci, 3, 3) for ci, co in ARCH]
    for (cin, _), w, w2 in zip(ARCH, a.weights, b.weights):
        assert np.array_equal(w, w2)
        assert np.abs(w).max() <= math.sqrt(6 / (cin * 9))
    assert all(np.all(bias == 0) for bias in a.biases)
    assert not np.array_equal(init_model(4).weights[0], a.weights[0])


def test_zero_model_outputs_half(rng):
    crop = rng.random((20, 30, 3))
    p = forward(zero_model(), crop)
    assert p.shape == (20, 30) and np.allclose(p, 0.5)
    assert not segment_crop(zero_model(), crop, 0.5).any()
    assert segment_crop(zero_model(), crop, 1e-9).all()
    with pytest.raises(ValueError):
        segment_crop(zero_model(), crop, 1.0)


def test_output_range(rng):
    p = forward(init_model(1, 24), rng.random((30, 30, 3)))
    assert p.min() > 0 and p.max() < 1


def test_translation_equivariance_interior(rng):
    model = init_model(2, 24)
    x = np.concatenate([rng.random((3, 24, 24)), coord_channels(24, 24)])
    shifted = x.copy()
    shifted[:3] = np.roll(x[:3], (2, 3), axis=(1, 2))
    for w in (model.weights[0],):
        w[:, 3:] = 0  # hold the coordinate channels' contribution out
    a = _forward_tensor(model, x)
    b = _forward_tensor(model, shifted)
    assert np.allclose(np.roll(a, (2, 3), axis=(0, 1))[8:18, 8:18], b[8:18, 8:18])


def test_uniform_half_loss_closed_form(rng):
    model = zero_model(8)
    label = rng.random((8, 8)) < 0.3
    label[0, 0], label[0, 1] = True, False
    loss, _ = loss_and_grad(model, rng.random((8, 8, 3)), label)
    p = label.mean()
    beta = 1 - p
    assert loss == pytest.approx(math.log(2) * (beta * p + (1 - beta) * (1 - p)), rel=1e-12)


def test_loss_nonnegative_and_single_class(rng, caplog):
    model = init_model(0, 8)
    loss, _ = loss_and_grad(model, rng.random((8, 8, 3)), rng.random((8, 8)) < 0.5)
    assert loss >= 0
    with caplog.at_level("WARNING"):
        loss_and_grad(model, rng.random((8, 8, 3)), np.ones((8, 8), dtype=bool))
    assert "single class" in caplog.text
    assert class_weights(np.ones((4, 4), dtype=bool))[2] is False


def test_near_perfect_prediction_loss_small(disc_fixture):
    img, label = disc_fixture
    model = zero_model(32)
    model.biases[-1][:] = 0
    # drive logits with a huge bias from the colour channel: R is 0.8 inside, 0.1 outside
    model.weights[0][0, 0, 1, 1] = 1.0
    model.weights[1][0, 0, 1, 1] = 1.0
    model.weights[2][0, 0, 1, 1] = 400.0
    model.biases[2][:] = -400 * 0.45
    loss, _ = loss_and_grad(model, img, label)
    assert loss < 1e-12


def test_lr_zero_keeps_weights(disc_fixture):
    img, label = disc_fixture
    m0 = init_model(0, 32)
    m1 = fine_tune(m0, label, img, TrainConfig(iterations=3, learning_rate=0.0))
    assert all(np.array_equal(a, b) for a, b in zip(m0.params(), m1.params()))
    assert len(m1.loss_trace) == 3 and m0.loss_trace == []


def test_fine_tune_deterministic_and_learns(disc_fixture):
    img, label = disc_fixture
    cfg = TrainConfig(iterations=150, seed=5)
    a = fine_tune(init_model(0, 32), label, img, cfg)
    b = fine_tune(init_model(0, 32), label, img, cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.params(), b.params()))
    tr = a.loss_trace
    assert np.median(tr[-15:]) < np.median(tr[:15])
    assert mask_iou(segment_crop(a, img), label) > 0.8


def test_label_shape_mismatch(disc_fixture):
    img, label = disc_fixture
    with pytest.raises(SegmentationError):
        fine_tune(init_model(0), label[:10], img, TrainConfig(iterations=1))


def test_save_load_round_trip(tmp_path):
    m = init_model(7, 40)
    m.biases[0][:] = 0.25
    save_model(m, tmp_path / "m.bin")
    head = (tmp_path / "m.bin").read_bytes()[:16]
    assert head.startswith(b"sslt-segmodel 1")
    r = load_model(tmp_path / "m.bin")
    assert r.input_size == 40 and r.seed == 7 and r.architecture == m.architecture
    assert all(np.array_equal(a, b) for a, b in zip(m.params(), r.params()))
