import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from formpred import deepnet
from formpred.deepnet import NetworkParams, NetworkSpec, TrainConfig

from oracles import finite_difference_gradient, random_network_problem, relative_error


def test_init_zero_biases_bounded_deterministic():
    spec = NetworkSpec((5, 7, 3, 2), seed=11)
    p = deepnet.init(spec)
    assert all((b == 0).all() for b in p.biases)
    for w in p.weights:
        fan_out, fan_in = w.shape
        assert np.abs(w).max() <= np.sqrt(6 / (fan_in + fan_out))
    q = deepnet.init(spec)
    assert all(np.array_equal(a, b) for a, b in zip(p.weights, q.weights))
    assert p.layer_widths == (5, 7, 3, 2)


def test_spec_and_config_validation():
    with pytest.raises(ValueError):
        NetworkSpec((3,))
    with pytest.raises(ValueError):
        NetworkSpec((3, 0, 1))
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)


def zero_params(widths):
    return NetworkParams([np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])], [np.zeros(o) for o in widths[1:]])


def test_forward_zero_params_half():
    p = zero_params((4, 6, 6, 3))
    assert (deepnet.forward(p, np.array([1.0, -2.0, 3.0, 9.0])) == 0.5).all()


def test_forward_output_bias():
    p = zero_params((2, 5, 1))
    p.biases[-1][:] = 0.7
    assert deepnet.forward(p, np.zeros(2))[0] == pytest.approx(1 / (1 + np.exp(-0.7)), abs=1e-15)


def test_forward_width_mismatch():
    with pytest.raises(ValueError):
        deepnet.forward(zero_params((2, 3, 1)), np.zeros(3))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), st.integers(0, 1000))
def test_forward_strictly_inside_unit_interval(x, seed):
    p = deepnet.init(NetworkSpec((3, 4, 2), seed))
    out = deepnet.forward(p, np.array(x))
    assert np.isfinite(out).all() and (out >= 0).all() and (out <= 1).all()
    small = deepnet.forward(p, np.array(x) * 1e-6)
    assert ((small > 0) & (small < 1)).all()


def test_forward_batch_matches_rows():
    p = deepnet.init(NetworkSpec((3, 4, 2), 1))
    X = np.random.default_rng(0).normal(size=(5, 3))
    assert np.allclose(deepnet.forward(p, X), np.vstack([deepnet.forward(p, x) for x in X]), atol=1e-15)


def test_gradient_zero_at_perfect_fit():
    p = deepnet.init(NetworkSpec((3, 5, 2), 2))
    X = np.random.default_rng(1).normal(size=(6, 3))
    Y = deepnet.forward(p, X)
    assert np.abs(deepnet.gradient(p, X, Y).flat()).max() <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    params, X, Y = random_network_problem(seed + 1000)
    err = relative_error(deepnet.gradient(params, X, Y), finite_difference_gradient(params, X, Y))
    assert err.max() <= 1e-5


def test_gradient_is_mean_of_row_gradients():
    params, X, Y = random_network_problem(3)
    X = np.vstack([X, X + 0.1])
    Y = np.vstack([Y, Y[::-1]])
    batch = deepnet.gradient(params, X, Y).flat()
    rows = np.mean([deepnet.gradient(params, X[i:i + 1], Y[i:i + 1]).flat() for i in range(len(X))], axis=0)
    assert np.abs(batch - rows).max() <= 1e-12


def test_gradient_shape_errors():
    p = deepnet.init(NetworkSpec((3, 2, 1)))
    with pytest.raises(ValueError):
        deepnet.gradient(p, np.zeros((2, 3)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        deepnet.gradient(p, np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        deepnet.gradient(p, np.zeros((0, 3)), np.zeros((0, 1)))


def test_zero_epochs_returns_init():
    spec = NetworkSpec((2, 4, 1), 9)
    X, Y = np.zeros((3, 2)), np.full((3, 1), 0.3)
    res = deepnet.train(spec, TrainConfig(epochs=0), X, Y)
    assert res.params.flat().tolist() == deepnet.init(spec).flat().tolist()
    assert len(res.losses) == 1


def test_plain_descent_step():
    spec = NetworkSpec((2, 3, 1), 4)
    X = np.array([[0.1, 0.2], [0.5, -0.3]])
    Y = np.array([[0.2], [0.9]])
    p0 = deepnet.init(spec)
    g0 = deepnet.gradient(p0, X, Y)
    res = deepnet.train(spec, TrainConfig(learning_rate=0.05, momentum=0.0, epochs=1), X, Y)
    assert np.array_equal(res.params.flat(), p0.flat() - 0.05 * g0.flat())


def test_two_manual_momentum_steps_single_parameter():
    # 1 -> 1 network with a single weight and bias: update both by hand
    spec = NetworkSpec((1, 1), 0)
    p0 = deepnet.init(spec)
    X, Y = np.array([[1.0]]), np.array([[0.8]])
    lr, mu = 0.5, 0.8
    w, b = float(p0.weights[0][0, 0]), 0.0
    vw = vb = 0.0
    for _ in range(2):
        out = 1 / (1 + np.exp(-(w + b)))
        d = 2 * (out - 0.8) * out * (1 - out)
        vw, vb = mu * vw - lr * d, mu * vb - lr * d
        w, b = w + vw, b + vb
    res = deepnet.train(spec, TrainConfig(lr, mu, 2), X, Y)
    assert res.params.weights[0][0, 0] == pytest.approx(w, abs=1e-15)
    assert res.params.biases[0][0] == pytest.approx(b, abs=1e-15)


def test_training_reduces_loss_and_is_deterministic(tmp_path):
    x = np.linspace(0, 1, 20).reshape(-1, 1)
    y = 0.2 + 0.6 * x ** 2
    spec, cfg = deepnet.preset("OFDF-DNN", 1, hidden_layers=2, seed=3)
    cfg = TrainConfig(cfg.learning_rate, cfg.momentum, 300)
    a = deepnet.train(spec, cfg, x, y)
    b = deepnet.train(spec, cfg, x, y)
    assert len(a.losses) == 301
    assert a.losses[-1] < a.losses[0]
    assert a.losses == b.losses and np.array_equal(a.params.flat(), b.params.flat())
    a.save_losses(tmp_path / "loss.csv")
    with open(tmp_path / "loss.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss"] and len(rows) == 302


def test_train_rejects_unscaled_targets():
    with pytest.raises(ValueError, match="scaled"):
        deepnet.train(NetworkSpec((1, 2, 1)), TrainConfig(epochs=1), np.zeros((2, 1)), np.array([[0.5], [30.0]]))


def test_presets():
    spec, cfg = deepnet.preset("OFDF-DNN", 17)
    assert spec.layer_widths == (17, *[50] * 9, 1)
    assert spec.n_weight_layers == 10
    assert (cfg.epochs, cfg.learning_rate, cfg.momentum) == (900, 0.01, 0.8)
    spec, cfg = deepnet.preset("SRMT-DNN", 15)
    assert spec.layer_widths == (15, *[30] * 8, 4)
    assert cfg.epochs == 2600
    assert deepnet.preset("srmt-dnn", 3, 2)[0].layer_widths[-1] == 2
    with pytest.raises(ValueError):
        deepnet.preset("XYZ", 3)


def test_params_json_roundtrip(tmp_path):
    p = deepnet.init(NetworkSpec((3, 4, 1, 2), 5))
    deepnet.save_params(tmp_path / "p.json", p)
    q = deepnet.load_params(tmp_path / "p.json")
    assert q.layer_widths == p.layer_widths
    assert np.array_equal(q.flat(), p.flat())
