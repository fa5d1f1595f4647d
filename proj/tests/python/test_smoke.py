import math

import numpy as np
import pytest

import awfnet


def softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def test_version():
    assert awfnet.__version__


def test_dwt2_roundtrip_and_example():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    ll, lh, hl, hh = awfnet.dwt2(x)
    assert ll.shape == (1, 1, 1, 1)
    assert abs(ll[0, 0, 0, 0] - 5.0) < 1e-12
    back = awfnet.idwt2(ll, lh, hl, hh)
    assert np.allclose(back, x, atol=1e-12)

    rng = np.random.default_rng(0)
    y = rng.normal(size=(2, 3, 8, 8))
    rec = awfnet.idwt2(*awfnet.dwt2(y))
    assert np.allclose(rec, y, atol=1e-10)
    # orthonormal transform preserves energy
    bands = awfnet.dwt2(y)
    assert math.isclose(
        sum(float((b**2).sum()) for b in bands), float((y**2).sum()), rel_tol=1e-9
    )


def test_loss_worked_example():
    logits = np.array([[0.0, 1.0]])
    targets = np.array([0])
    s = awfnet.balance_factors([1 / (1 + math.e), math.e / (1 + math.e)], [300, 100], 0)
    assert abs(s[1] - 20.0299) < 1e-3
    out = awfnet.cs_loss(logits, targets, class_counts=[300, 100])
    assert abs(out["value"] - 4.0154) < 1e-3

    bc0 = awfnet.bc_loss(logits, targets, class_counts=[300, 100], alpha=0.0)
    ce = awfnet.ce_loss(logits, targets)
    assert bc0["value"] == ce["value"]


def test_ce_gradient_closed_form():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(5, 3))
    targets = np.array([0, 1, 2, 1, 0])
    grad = awfnet.ce_gradient(logits, targets)
    p = softmax(logits)
    onehot = np.zeros_like(p)
    onehot[np.arange(5), targets] = 1.0
    assert np.allclose(grad, (p - onehot) / 5.0, atol=1e-12)
    # and the loss entry point reports the same gradient
    out = awfnet.ce_loss(logits, targets)
    assert np.allclose(out["grad"], grad, atol=1e-12)


def test_focal_reduces_to_ce_at_gamma_zero():
    rng = np.random.default_rng(4)
    logits = rng.normal(size=(4, 3))
    targets = np.array([0, 2, 1, 1])
    fl = awfnet.focal_loss(logits, targets, gamma=0.0)
    ce = awfnet.ce_loss(logits, targets)
    assert fl["value"] == ce["value"]


def test_metrics():
    probs = np.array([[0.1, 0.9], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]])
    labels = np.array([1, 0, 1, 0])
    assert abs(awfnet.auc(probs, labels) - 0.75) < 1e-12

    two = np.array([[0.1, 0.9], [0.1, 0.9]])
    ece, mce = awfnet.calibration_errors(two, np.array([1, 0]))
    assert abs(ece - 0.4) < 1e-9
    assert abs(mce - 0.4) < 1e-9

    const = np.tile(np.array([[0.6, 0.3, 0.1]]), (6, 1))
    rep = awfnet.classification_metrics(const, np.array([0, 0, 1, 1, 2, 2]))
    assert abs(rep["b_acc"] - 1 / 3) < 1e-12


def test_network_forward_and_checkpoint(tmp_path):
    net = awfnet.AwfNet(channels=[2, 4], blocks=1, input_size=16, groups=2, seed=7)
    assert net.parameter_count > 0
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 1, 16, 16))
    a = net.forward(x)
    b = net.forward(x)
    assert a.shape == (2, 2)
    assert np.array_equal(a, b)  # eval mode is deterministic

    path = str(tmp_path / "model.awfn")
    net.save(path)
    other = awfnet.AwfNet(channels=[2, 4], blocks=1, input_size=16, groups=2, seed=8)
    assert not np.array_equal(other.forward(x), a)
    other.load(path)
    assert np.array_equal(other.forward(x), a)

    with pytest.raises(awfnet.AwfnetError):
        net.forward(rng.normal(size=(1, 1, 8, 8)))


def test_generate_synthetic():
    data = awfnet.generate_synthetic(samples=60, size=16, seed=1)
    x, y = data["train"]
    assert x.shape[1:] == (1, 16, 16)
    assert set(np.unique(y)) == {0, 1}
    flat = x.reshape(len(x), -1)
    assert np.abs(flat.mean(axis=1)).max() < 1e-5
    assert np.allclose(flat.var(axis=1), 1.0, atol=1e-3)


def test_run_training_smoke():
    out = awfnet.run_training(
        samples=40, size=16, channels=[2, 4], blocks=1, epochs=2, batch=8, lr=1e-3, seed=3
    )
    assert len(out["epochs"]) == 2
    assert 0.0 <= out["test"]["b_acc"] <= 1.0
    rerun = awfnet.run_training(
        samples=40, size=16, channels=[2, 4], blocks=1, epochs=2, batch=8, lr=1e-3, seed=3
    )
    assert out["epochs"][-1]["val_loss"] == rerun["epochs"][-1]["val_loss"]


def test_gradcheck_suite_quick():
    reports = awfnet.gradcheck_suite(seeds=1)
    assert all(r["pass"] for r in reports)
    assert any(r["op"] == "awfnet_bc_end_to_end" for r in reports)
