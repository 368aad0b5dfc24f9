import math

import numpy as np
import pytest

import contrastlab as cl


def unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def test_dot_and_normalize():
    assert cl.dot(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
    n = cl.l2_normalize(np.array([3.0, 4.0]))
    np.testing.assert_allclose(n, [0.6, 0.8])
    with pytest.raises(ValueError):
        cl.dot(np.ones(2), np.ones(3))


def test_queue_and_losses():
    rng = np.random.default_rng(0)
    q = cl.NegativeQueue(4, 3)
    keys = np.stack([unit(rng, 3) for _ in range(4)])
    q.push(keys, [5, 1, cl.UNLABELED, 5])
    assert q.filled == 4
    assert cl.filter_negatives(q, 5) == [1, 2]

    a, k = unit(rng, 3), unit(rng, 3)
    self_loss = cl.loss_self(a, k, q, 0.2)
    full_loss = cl.loss_full(a, k, q, 5, 0.2)
    assert self_loss["loss"] >= 0.0
    assert full_loss["active_negatives"] == 2
    assert full_loss["loss"] <= self_loss["loss"]

    semi = cl.loss_semi(np.stack([a, a]), np.stack([k, k]), [5, None], q, q, 0.2)
    assert semi == pytest.approx(full_loss["loss"] + self_loss["loss"], rel=1e-15)


def test_uniform_logits_give_log_m_plus_one():
    q = cl.NegativeQueue(3, 2)
    q.push(np.array([[0.0, 1.0]] * 3), [0, 1, 2])
    out = cl.loss_self(np.array([1.0, 0.0]), np.array([0.0, 1.0]), q, 0.5)
    assert out["loss"] == pytest.approx(math.log(4.0), abs=1e-12)


def test_metrics():
    anchors = np.array([[1.0, 0.0], [0.0, 1.0]])
    views = np.stack([anchors, anchors], axis=1)
    assert cl.invariance(anchors, views) == pytest.approx(1.0)
    assert cl.diversity(views, 1.0) == pytest.approx(math.e)


def test_augmentations():
    rng = np.random.default_rng(1)
    img = rng.random((12, 12, 3), dtype=np.float32)
    donor = rng.random((12, 12, 3), dtype=np.float32)
    assert cl.base_view(img, 8, 3).shape == (8, 8, 3)
    np.testing.assert_array_equal(cl.random_erasing(img, 1, 0.0)[0], img)
    out, rect = cl.cutout(img, 2, 0.0)
    np.testing.assert_array_equal(out, img)
    assert rect[2] * rect[3] == 0
    out, (y, x, h, w) = cl.cutout(img, 2, 0.5)
    assert not out[y:y + h, x:x + w].any()
    mixed, lam, (y, x, h, w) = cl.cutmix(img, donor, 4)
    assert 0.5 <= lam <= 1.0
    assert abs((1 - lam) - h * w / 144) < 1e-15
    np.testing.assert_array_equal(cl.mixup(img, donor, 1.0), img)
    views, lambdas = cl.make_views(img, [donor], 2, "cutmix", 8, 5)
    assert len(views) == 2 and len(lambdas) == 2


def test_cifar_parse():
    record = bytes([7]) + bytes(i % 256 for i in range(3072))
    images, labels = cl.parse_cifar10(record * 2)
    assert images.shape == (2, 32, 32, 3)
    assert list(labels) == [7, 7]
    assert images[0, 0, 1, 0] == pytest.approx(1 / 255)
    with pytest.raises(RuntimeError):
        cl.parse_cifar10(record[:-1])


def test_synth_and_gradcheck():
    images, labels = cl.synth_dataset(classes=4, per_class=3, image_size=8, seed=2)
    assert images.shape == (12, 8, 8, 1)
    assert sorted(set(labels)) == [0, 1, 2, 3]
    errs = cl.run_gradcheck(10, 3)
    assert set(errs) >= {"loss_self", "loss_full", "loss_semi", "encoder_backward"}
    assert max(errs.values()) < 1e-4


def test_tiny_pretrain_and_metrics_rerun():
    cfg = "\n".join([
        "data.classes=4", "data.per_class=16", "data.image_size=8", "model.hidden=16",
        "model.embed_dim=8", "train.batch_size=16", "train.epochs=2", "train.queue_size=32",
        "metrics.anchors=16", "probe.max_iters=100", "aug.kind=cutmix",
    ])
    r = cl.pretrain(cfg, seed=3)
    assert len(r["batch_losses"]) == 8
    assert r["checkpoint"][:5] == b"CLAB1"
    assert 0.0 <= r["top1"] <= r["top5"] <= 100.0
    again = cl.metrics(cfg, r["checkpoint"], seed=3)
    assert again == r["metrics"]
