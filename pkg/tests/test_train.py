import dataclasses
import math

import numpy as np
import pytest

from vnhgcn.data import SyntheticSpec, generate_synthetic
from vnhgcn.errors import ConfigError, DataError, TrainingError
from vnhgcn.train import (AdamState, TrainConfig, adam_step, fit, l2_penalty, loss_and_grads,
                          make_split, model_graph, new_params)

SMALL = TrainConfig(epochs=30, layers=2, hidden_dim=8, d_a=4, n_virtual=2, central_dim=4)


@pytest.fixture(scope="module")
def small_graph():
    return generate_synthetic(SyntheticSpec(n_target=45, n_bridge=20, n_context=5, feature_dim=4, seed=2))


def test_defaults():
    c = TrainConfig()
    assert (c.learning_rate, c.l2, c.epochs, c.layers, c.hidden_dim, c.d_a, c.n_virtual) == \
        (1e-3, 1e-4, 1000, 4, 64, 64, 16)


@pytest.mark.parametrize("bad", [dict(dropout=1.0), dict(drop_edge=1.5), dict(layers=0),
                                 dict(learning_rate=-1), dict(assignment="x")])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        TrainConfig(**bad)


@pytest.mark.parametrize("n,ratio,sizes", [(10, 0.2, (2, 4, 4)), (11, 0.2, (3, 4, 4)),
                                           (10, 0.6, (6, 2, 2)), (7, 0.4, (3, 2, 2))])
def test_split_sizes(n, ratio, sizes):
    assert make_split(np.zeros(n, int), ratio, 0).sizes() == sizes


def test_split_laws():
    labels = np.array([0, 1, -1, 2] * 25)
    a = make_split(labels, 0.2, 5)
    b = make_split(labels, 0.2, 5)
    assert all(np.array_equal(x, y) for x, y in zip((a.train, a.val, a.test), (b.train, b.val, b.test)))
    union = np.concatenate([a.train, a.val, a.test])
    assert len(set(union.tolist())) == len(union) == 75
    assert set(union.tolist()) == set(np.flatnonzero(labels >= 0).tolist())
    assert abs(len(a.val) - len(a.test)) <= 1


def test_split_errors():
    with pytest.raises(DataError):
        make_split(np.full(4, -1), 0.2, 0)
    with pytest.raises(ConfigError):
        make_split(np.zeros(4, int), 1.0, 0)


def test_adam_zero_gradient():
    p = {"w": np.array([1.0, -2.0])}
    st = AdamState()
    for _ in range(5):
        adam_step(p, {"w": np.zeros(2)}, st, 0.1)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_adam_first_step():
    p = {"w": np.array([0.5])}
    adam_step(p, {"w": np.array([1.0])}, AdamState(), 1e-3)
    # m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
    assert abs((0.5 - p["w"][0]) - 1e-3 / (1 + 1e-8)) < 1e-15


def test_adam_against_reference_loop():
    rng = np.random.default_rng(0)
    gs = rng.normal(size=(6, 3))
    p = {"w": np.zeros(3)}
    st = AdamState()
    m = v = np.zeros(3)
    w = np.zeros(3)
    for t, g in enumerate(gs, 1):
        adam_step(p, {"w": g}, st, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g ** 2
        w = w - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p["w"], w, rtol=0, atol=1e-15)


def test_adam_nonfinite_names_tensor():
    with pytest.raises(TrainingError, match="bad"):
        adam_step({"bad": np.zeros(1)}, {"bad": np.array([np.nan])}, AdamState(), 0.1)


def test_l2_penalty_direct_sum(small_graph):
    p = new_params(model_graph(small_graph, SMALL), SMALL)
    direct = 0.0
    for layer in p.layers:
        for d in (layer.self_weight, layer.cross_weight, layer.att_matrix, layer.att_vector):
            for a in d.values():
                direct += float((a.ravel() ** 2).sum())
    assert math.isclose(l2_penalty(p, 0.01), 0.01 * direct, rel_tol=1e-12)


def test_loss_includes_l2(small_graph):
    g = model_graph(small_graph, SMALL)
    p = new_params(g, SMALL)
    mask = np.arange(10)
    l0, _ = loss_and_grads(g, p, small_graph.labels, mask, 0.0)
    l1, _ = loss_and_grads(g, p, small_graph.labels, mask, 0.5)
    assert math.isclose(l1 - l0, l2_penalty(p, 0.5), rel_tol=1e-10)


def test_zero_lr_leaves_params(small_graph):
    cfg = dataclasses.replace(SMALL, learning_rate=0.0, l2=0.0, epochs=5)
    split = make_split(small_graph.labels, 0.2, 0)
    res = fit(small_graph, cfg, split)
    init = new_params(model_graph(small_graph, cfg), cfg).tensors()
    assert all(init[k].tobytes() == v.tobytes() for k, v in res.params.tensors().items())


def test_fit_deterministic_and_best_epoch(small_graph):
    split = make_split(small_graph.labels, 0.2, 0)
    a = fit(small_graph, SMALL, split)
    b = fit(small_graph, SMALL, split)
    assert a.metrics_csv() == b.metrics_csv()
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.params.tensors().values(),
                                                          b.params.tensors().values()))
    scores = [m.val_micro_f1 for m in a.history]
    assert a.best_epoch == int(np.argmax(scores)) + 1
    assert len(a.history) == 30
    assert a.metrics_csv().splitlines()[0] == "epoch,train_loss,val_micro_f1,val_macro_f1"


def test_fit_plain_model(small_graph):
    cfg = dataclasses.replace(SMALL, n_virtual=0, epochs=3)
    res = fit(small_graph, cfg, make_split(small_graph.labels, 0.2, 0))
    assert res.graph is small_graph


def test_loss_decreases_and_train_accuracy():
    g = generate_synthetic(SyntheticSpec(seed=0))
    cfg = TrainConfig(epochs=200, hidden_dim=16, d_a=16, n_virtual=4, central_dim=8, layers=2)
    split = make_split(g.labels, 0.2, 1)
    res = fit(g, cfg, split)
    losses = np.array([m.train_loss for m in res.history])
    windows = losses[:100].reshape(4, 25).mean(axis=1)
    assert losses[99] < losses[0]
    assert np.all(np.diff(windows) < 0)
    from vnhgcn.train import evaluate
    assert evaluate(res.graph, res.params, split.train).micro_f1 >= 0.99


def test_fit_requires_labels():
    from vnhgcn.graph import NetworkSchema, build_graph
    g = build_graph(NetworkSchema.build(["A"], []), {"A": np.ones((4, 2))}, {})
    with pytest.raises(DataError):
        fit(g, SMALL, make_split(np.zeros(4, int), 0.5, 0))
