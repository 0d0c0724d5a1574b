import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph, two_cliques
from lrkernel.dataset import SbmConfig, generate_sbm
from lrkernel.model import ForwardContext
from lrkernel.representation import build_representation
from lrkernel.splits import SplitSet, make_balanced, make_dense
from lrkernel.training import (
    AdamState, TrainConfig, TrainingDiverged, accuracy, adam_step, cross_entropy, train_run,
)


def test_uniform_logits_loss():
    loss, _ = cross_entropy(np.zeros((4, 5)), [0, 1, 2, 3], [0, 1, 2, 3])
    assert loss == pytest.approx(math.log(5), abs=1e-12)


def test_loss_vanishes_with_margin():
    labels = [0, 2, 1]
    losses = []
    for margin in (1.0, 10.0, 100.0, 1000.0):
        logits = np.eye(3)[labels] * margin
        losses.append(cross_entropy(logits, labels, [0, 1, 2])[0])
    assert losses == sorted(losses, reverse=True)
    assert losses[-1] < 1e-300 or losses[-1] == 0.0
    assert np.isfinite(cross_entropy(np.array([[1e4, -1e4]]), [1], [0])[0])


def test_cross_entropy_gradient_finite_differences():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((8, 4))
    labels = rng.integers(0, 4, 8)
    mask = [0, 2, 3, 7]
    _, G = cross_entropy(logits, labels, mask)
    fd = np.zeros_like(logits)
    h = 1e-6
    for i in range(8):
        for j in range(4):
            e = np.zeros_like(logits)
            e[i, j] = h
            fd[i, j] = (cross_entropy(logits + e, labels, mask)[0]
                        - cross_entropy(logits - e, labels, mask)[0]) / (2 * h)
    assert np.allclose(G, fd, atol=1e-6)
    assert np.all(G[[1, 4, 5, 6]] == 0)


def test_empty_mask_errors():
    with pytest.raises(ValueError):
        cross_entropy(np.zeros((3, 2)), [0, 0, 0], [])
    with pytest.raises(ValueError):
        accuracy(np.zeros((3, 2)), [0, 0, 0], np.zeros(3, bool))


def test_accuracy_cases():
    labels = np.array([0, 1, 2])
    assert accuracy(np.eye(3), labels, [0, 1, 2]) == 1.0
    assert accuracy(np.zeros((3, 4)), [0, 0, 0], [0, 1, 2]) == 1.0
    assert accuracy(np.eye(3)[[1, 1, 2]], labels, [0, 1, 2]) == pytest.approx(2 / 3)


def test_accuracy_random_labels_near_chance():
    rng = np.random.default_rng(0)
    acc = accuracy(rng.standard_normal((10_000, 5)), rng.integers(0, 5, 10_000), np.arange(10_000))
    assert abs(acc - 0.2) <= 0.02


@given(st.floats(1e-3, 1e3), st.integers(0, 100))
def test_accuracy_scale_invariant_loss_not(c, seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((20, 3))
    labels = rng.integers(0, 3, 20)
    idx = np.arange(20)
    assert accuracy(c * logits, labels, idx) == accuracy(logits, labels, idx)


def test_loss_not_scale_invariant():
    logits = np.array([[2.0, 0.0], [0.0, 1.0]])
    assert cross_entropy(logits, [0, 1], [0, 1])[0] != cross_entropy(3 * logits, [0, 1], [0, 1])[0]


def test_adam_first_step():
    cfg = TrainConfig(lr=1e-3)
    theta = {"w": np.array([0.5])}
    adam_step(AdamState(), theta, {"w": np.array([1.0])}, cfg)
    # m_hat = 1, v_hat = 1 => step = lr / (1 + eps)
    assert theta["w"][0] == pytest.approx(0.5 - 1e-3 / (1 + 1e-8), abs=1e-15)
    theta = {"w": np.array([0.5])}
    adam_step(AdamState(), theta, {"w": np.array([-250.0])}, cfg)
    assert theta["w"][0] == pytest.approx(0.5 + 1e-3, abs=1e-10)


def test_adam_zero_gradient_is_noop():
    theta = {"a": np.array([1.0, -2.0]), "b": np.ones((2, 2))}
    before = {k: v.copy() for k, v in theta.items()}
    state = AdamState()
    for _ in range(5):
        adam_step(state, theta, {k: np.zeros_like(v) for k, v in theta.items()}, TrainConfig())
    assert all(np.array_equal(theta[k], before[k]) for k in theta)
    assert state.t == 5


def scalar_adam_reference(theta, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float Adam on f = theta^2."""
    m = v = 0.0
    path = []
    for t in range(1, steps + 1):
        g = 2 * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        path.append(theta)
    return path


def test_adam_quadratic_trajectory():
    ref = scalar_adam_reference(1.0, 1e-2, 100)
    assert all(abs(b) < abs(a) for a, b in zip([1.0] + ref, ref))
    cfg = TrainConfig(lr=1e-2)
    theta = {"x": np.array([1.0])}
    state = AdamState()
    for expected in ref:
        adam_step(state, theta, {"x": 2 * theta["x"]}, cfg)
        assert theta["x"][0] == pytest.approx(expected, rel=1e-12)


def test_adam_weight_decay_enters_gradient():
    cfg = TrainConfig(lr=0.1, weight_decay=0.5)
    theta = {"x": np.array([2.0])}
    adam_step(AdamState(), theta, {"x": np.array([0.0])}, cfg)
    assert theta["x"][0] == pytest.approx(2.0 - 0.1, abs=1e-7)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)


@pytest.mark.parametrize("seed", range(5))
def test_separable_cliques_reach_full_accuracy(seed):
    ds = two_cliques(seed=seed)
    ctx = ForwardContext(X=ds.features, P=build_representation(ds, "adjacency").values)
    res = train_run("prop_linear", ctx, ds.labels, make_dense(ds, seed),
                    TrainConfig(lr=1e-2, epochs=200, seed=seed))
    assert res.test_accuracy == 1.0


def test_single_epoch_and_determinism():
    ds = random_graph(40, seed=1)
    ctx = ForwardContext(X=ds.features, P=build_representation(ds, "nadj").values)
    split = make_dense(ds, 0)
    res = train_run("prop_linear", ctx, ds.labels, split, TrainConfig(epochs=1))
    assert res.best_epoch == 1 and len(res.loss_trace) == 1
    cfg = TrainConfig(lr=5e-2, epochs=60, seed=3)
    a = train_run("mlp2", ctx, ds.labels, split, cfg, hidden=8)
    b = train_run("mlp2", ctx, ds.labels, split, cfg, hidden=8)
    assert a == b


def test_checkpoint_is_earliest_best_validation():
    ds = generate_sbm(SbmConfig([30, 30, 30], 0.3, 0.05, "block-means", 6, seed=2))
    ctx = ForwardContext(X=ds.features, P=build_representation(ds, "nadj").values)
    res = train_run("prop_linear", ctx, ds.labels, make_balanced(ds, 1),
                    TrainConfig(lr=1e-2, epochs=150))
    vt = res.val_trace
    assert res.val_accuracy == max(vt)
    assert res.best_epoch == vt.index(max(vt)) + 1


def test_no_validation_reports_last_epoch():
    ds = random_graph(30, seed=2)
    split = SplitSet(np.arange(10), np.zeros(0, int), np.arange(10, 30), "sparse", 0)
    res = train_run("linear", ForwardContext(X=ds.features), ds.labels, split,
                    TrainConfig(epochs=7))
    assert res.best_epoch == 7 and math.isnan(res.val_accuracy)


def test_linear_loss_monotone_windows():
    ds = generate_sbm(SbmConfig([40, 40, 40], 0.2, 0.05, "block-means", 10, seed=0))
    res = train_run("linear", ForwardContext(X=ds.features), ds.labels, make_balanced(ds, 0),
                    TrainConfig(lr=1e-2, epochs=200))
    trace = res.loss_trace
    for start in range(0, len(trace) - 50, 50):
        assert trace[start + 50] <= trace[start]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reported():
    ds = random_graph(20, seed=0)
    X = ds.features.copy()
    X[0, 0] = np.inf
    with pytest.raises(TrainingDiverged) as err:
        train_run("linear", ForwardContext(X=X), ds.labels, make_dense(ds, 0),
                  TrainConfig(epochs=3))
    assert err.value.epoch == 1
