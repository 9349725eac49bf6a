import json
import math

import numpy as np
import pytest

from fairprep.mlcore import (
    LinearModel,
    SingularSystemError,
    TrainConfig,
    TrainingDivergedError,
    accuracy,
    adam_init,
    adam_step,
    auc,
    binary_cross_entropy,
    derive_rng,
    fit_linear,
    fit_logistic,
    load_model,
    mlp_backward,
    mlp_forward,
    mlp_init,
    n_parameters,
    predict,
    r_squared,
    save_model,
    sgd_step,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    squared_error,
)

import oracles


# ---------------------------------------------------------------------------
# rng


def test_derive_rng_reproducible_and_label_separated():
    a = derive_rng(7, "x").standard_normal(5)
    b = derive_rng(7, "x").standard_normal(5)
    c = derive_rng(7, "y").standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# forward pass


def test_mlp_init_shapes_and_param_count():
    net = mlp_init([3, 1], rng=derive_rng(0, "t"))
    assert net.weights[0].shape == (3, 1) and net.biases[0].shape == (1,)
    net = mlp_init([4, 8, 2], rng=derive_rng(0, "t"))
    assert n_parameters(net) == 4 * 8 + 8 + 8 * 2 + 2  # 58


def test_mlp_init_same_seed_identical():
    a = mlp_init([4, 5, 2], rng=derive_rng(3, "init"))
    b = mlp_init([4, 5, 2], rng=derive_rng(3, "init"))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_mlp_init_rejects_bad_dims():
    with pytest.raises(ValueError):
        mlp_init([4])
    with pytest.raises(ValueError):
        mlp_init([4, 0])


def test_forward_zero_weights_sigmoid_gives_half():
    net = mlp_init([3, 1], output_activation="sigmoid", rng=derive_rng(0, "t"))
    for w in net.weights:
        w[:] = 0.0
    _, out = mlp_forward(net, np.ones((4, 3)))
    assert np.all(out == 0.5)


def test_forward_single_identity_layer_is_affine():
    net = mlp_init([2, 3], rng=derive_rng(1, "t"))
    X = derive_rng(2, "t").standard_normal((5, 2))
    _, out = mlp_forward(net, X)
    assert np.allclose(out, X @ net.weights[0] + net.biases[0])


def test_forward_matches_hand_computation():
    rng = derive_rng(5, "hand")
    net = mlp_init([3, 4, 2], hidden_activation="tanh", rng=rng)
    X = rng.standard_normal((3, 3))
    _, out = mlp_forward(net, X)
    # independent re-derivation with explicit numpy ops
    hidden = np.tanh(X @ net.weights[0] + net.biases[0])
    expected = hidden @ net.weights[1] + net.biases[1]
    assert np.allclose(out, expected, atol=1e-12)


def test_forward_rejects_bad_input():
    net = mlp_init([3, 2], rng=derive_rng(0, "t"))
    with pytest.raises(ValueError):
        mlp_forward(net, np.ones((2, 4)))
    with pytest.raises(ValueError):
        mlp_forward(net, np.array([[1.0, 2.0, float("inf")]]))


def test_softmax_outputs_are_distributions():
    net = mlp_init([3, 5, 4], output_activation="softmax", rng=derive_rng(9, "t"))
    _, out = mlp_forward(net, derive_rng(10, "t").standard_normal((20, 3)) * 8)
    assert np.all(out > 0.0) and np.all(out < 1.0)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)


def test_sigmoid_extreme_inputs_stay_in_bounds():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert 0.0 <= out[0] < 1e-12 and out[1] == 0.5 and 1.0 - 1e-12 < out[2] <= 1.0


# ---------------------------------------------------------------------------
# backward pass


def _loss_fn(kind, target):
    if kind == "squared":
        return lambda out: squared_error(out, target)[0]
    if kind == "softmax":
        return lambda out: softmax_cross_entropy(out, target)[0]
    return lambda out: binary_cross_entropy(out, target)[0]


def test_backward_finite_difference_5_7_3():
    rng = derive_rng(11, "fd")
    net = mlp_init([5, 7, 3], hidden_activation="tanh", rng=rng)
    X = rng.standard_normal((6, 5))
    Y = np.zeros((6, 3))
    Y[np.arange(6), rng.integers(3, size=6)] = 1.0
    cache, out = mlp_forward(net, X)
    _, grad = softmax_cross_entropy(out, Y)
    analytic, _ = mlp_backward(net, cache, grad)
    numeric = oracles.finite_diff_param_grads(net, X, _loss_fn("softmax", Y))
    assert oracles.max_relative_error(analytic, numeric) <= 1e-4


def test_backward_zero_gradient_propagates_zero():
    net = mlp_init([4, 3, 2], rng=derive_rng(12, "t"))
    X = derive_rng(13, "t").standard_normal((5, 4))
    cache, out = mlp_forward(net, X)
    grads, input_grad = mlp_backward(net, cache, np.zeros_like(out))
    assert all(np.all(dw == 0) and np.all(db == 0) for dw, db in grads)
    assert np.all(input_grad == 0)


def test_backward_single_linear_layer_closed_form():
    rng = derive_rng(14, "t")
    net = mlp_init([3, 1], rng=rng)
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal((8, 1))
    cache, out = mlp_forward(net, X)
    _, grad = squared_error(out, y)
    grads, _ = mlp_backward(net, cache, grad)
    expected = X.T @ (out - y) * (2.0 / 8)
    assert np.allclose(grads[0][0], expected, atol=1e-12)


def test_backward_rejects_mismatched_cache():
    net = mlp_init([3, 2], rng=derive_rng(0, "t"))
    cache, out = mlp_forward(net, np.ones((2, 3)))
    with pytest.raises(ValueError):
        mlp_backward(net, cache, np.ones((3, 2)))


def test_backward_input_gradient_checks_numerically():
    rng = derive_rng(15, "ig")
    net = mlp_init([4, 6, 2], output_activation="sigmoid", rng=rng)
    X = rng.standard_normal((3, 4))
    y = rng.integers(0, 2, size=(3, 2)).astype(float)
    cache, out = mlp_forward(net, X)
    _, grad = binary_cross_entropy(out, y)
    _, input_grad = mlp_backward(net, cache, grad)
    step = 1e-6
    i, j = 1, 2
    Xp = X.copy(); Xp[i, j] += step
    Xm = X.copy(); Xm[i, j] -= step
    lp = binary_cross_entropy(mlp_forward(net, Xp)[1], y)[0]
    lm = binary_cross_entropy(mlp_forward(net, Xm)[1], y)[0]
    fd = (lp - lm) / (2 * step)
    assert input_grad[i, j] == pytest.approx(fd, rel=1e-4)


def test_adam_and_sgd_reduce_loss():
    rng = derive_rng(16, "opt")
    X = rng.standard_normal((32, 4))
    y = (X[:, :1] > 0).astype(float)
    for stepper in ("adam", "sgd"):
        net = mlp_init([4, 8, 1], output_activation="sigmoid", rng=derive_rng(17, "opt"))
        state = adam_init(net)
        losses = []
        for _ in range(60):
            cache, out = mlp_forward(net, X)
            loss, grad = binary_cross_entropy(out, y)
            losses.append(loss)
            grads, _ = mlp_backward(net, cache, grad)
            if stepper == "adam":
                adam_step(net, grads, state, 0.01)
            else:
                sgd_step(net, grads, 0.5)
        assert losses[-1] < losses[0] * 0.8


# ---------------------------------------------------------------------------
# logistic regression


def test_logistic_separable_reaches_perfect_accuracy():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0.0, 1.0])
    model = fit_logistic(X, y, TrainConfig(learning_rate=0.5, epochs=400, l2=0.0))
    assert accuracy(predict(model, X), y) == 1.0


def test_logistic_matches_irls_oracle():
    rng = derive_rng(20, "irls")
    X = rng.standard_normal((50, 2))
    logits = 1.2 * X[:, 0] - 0.7 * X[:, 1] + 0.3
    y = (rng.random(50) < 1.0 / (1.0 + np.exp(-logits))).astype(float)
    l2 = 1e-2
    cfg = TrainConfig(learning_rate=1.0, epochs=20_000, l2=l2)
    model = fit_logistic(X, y, cfg)
    w_ref, b_ref = oracles.irls_logistic(X, y, l2)
    dist = math.hypot(*(model.weights - w_ref)) + abs(model.intercept - b_ref)
    assert dist <= 1e-3


def test_logistic_loss_non_increasing_at_small_lr():
    rng = derive_rng(21, "mono")
    X = rng.standard_normal((40, 3))
    y = (rng.random(40) < 0.5).astype(float)
    model = fit_logistic(X, y, TrainConfig(learning_rate=1e-3, epochs=300))
    diffs = np.diff(model.loss_history)
    assert np.all(diffs <= 1e-12)


def test_logistic_rejects_single_class_and_bad_labels():
    X = np.ones((4, 1))
    with pytest.raises(ValueError, match="single-class"):
        fit_logistic(X, np.zeros(4), TrainConfig())
    with pytest.raises(ValueError, match="0/1"):
        fit_logistic(X, np.array([0.0, 1.0, 2.0, 1.0]), TrainConfig())


def test_logistic_divergence_reports_epoch():
    X = np.array([[1e3], [-1e3], [1e3], [-1e3]])
    y = np.array([1.0, 0.0, 1.0, 0.0])
    with np.errstate(over="ignore"), pytest.raises(TrainingDivergedError) as err:
        fit_logistic(X, y, TrainConfig(learning_rate=1e150, epochs=50, l2=1.0))
    assert err.value.epoch >= 0


def test_logistic_deterministic():
    rng = derive_rng(22, "det")
    X = rng.standard_normal((30, 3))
    y = (rng.random(30) < 0.5).astype(float)
    cfg = TrainConfig(learning_rate=0.1, epochs=200)
    m1 = fit_logistic(X, y, cfg)
    m2 = fit_logistic(X, y, cfg)
    assert np.array_equal(m1.weights, m2.weights) and m1.intercept == m2.intercept


# ---------------------------------------------------------------------------
# linear / ridge regression


def test_linear_exact_line():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = 2.0 * X[:, 0] + 1.0
    model = fit_linear(X, y, 0.0)
    assert model.weights[0] == pytest.approx(2.0, abs=1e-9)
    assert model.intercept == pytest.approx(1.0, abs=1e-9)


def test_ridge_large_lambda_shrinks_to_mean():
    rng = derive_rng(23, "ridge")
    X = rng.standard_normal((30, 2))
    y = X @ np.array([1.0, -2.0]) + 0.5
    model = fit_linear(X, y, 1e12)
    assert np.allclose(model.weights, 0.0, atol=1e-6)
    assert model.intercept == pytest.approx(float(y.mean()), abs=1e-6)


def test_ridge_matches_gradient_descent_oracle():
    rng = derive_rng(24, "gd")
    X = rng.standard_normal((20, 3))
    y = X @ np.array([0.5, -1.0, 2.0]) + 0.3 + 0.1 * rng.standard_normal(20)
    model = fit_linear(X, y, 0.1)
    w_ref, b_ref = oracles.gd_ridge(X, y, 0.1)
    dist = float(np.linalg.norm(model.weights - w_ref)) + abs(model.intercept - b_ref)
    assert dist <= 1e-6


def test_linear_singular_system_errors():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])  # duplicated column
    y = np.array([1.0, 2.0, 3.0])
    with pytest.raises(SingularSystemError, match="ridge_lambda"):
        fit_linear(X, y, 0.0)
    fit_linear(X, y, 0.1)  # regularized system solves fine


# ---------------------------------------------------------------------------
# prediction + metrics


def test_predict_trivial_values():
    logistic = LinearModel(np.zeros(2), 0.0, "logistic")
    assert np.all(predict(logistic, np.ones((3, 2))) == 0.5)
    linear = LinearModel(np.array([2.0]), 1.0, "linear")
    assert predict(linear, np.array([[3.0]]))[0] == pytest.approx(7.0)


def test_predict_probabilities_match_sigmoid():
    rng = derive_rng(25, "pred")
    model = LinearModel(rng.standard_normal(3), 0.2, "logistic")
    X = rng.standard_normal((10, 3))
    expected = 1.0 / (1.0 + np.exp(-(X @ model.weights + model.intercept)))
    assert np.allclose(predict(model, X), expected, atol=1e-12)


def test_predict_dimension_mismatch():
    model = LinearModel(np.zeros(2), 0.0, "linear")
    with pytest.raises(ValueError):
        predict(model, np.ones((3, 5)))


def test_accuracy_cases():
    assert accuracy([0.9, 0.1], [1, 0]) == 1.0
    assert accuracy([0.6, 0.4, 0.7], [1, 0, 0]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        accuracy([0.5], [1, 0])


def test_r_squared_cases():
    y = np.array([1.0, 2.0, 3.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(np.full(3, y.mean()), y) == pytest.approx(0.0)
    assert r_squared(-y, y) < 0.0
    with pytest.raises(ValueError, match="constant"):
        r_squared(y, np.ones(3))


def test_auc_cases():
    assert auc([0.1, 0.9], [0, 1]) == 1.0
    assert auc([0.9, 0.1], [0, 1]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        auc([0.5, 0.5], [1, 1])


def test_model_save_load_round_trip(tmp_path):
    model = LinearModel(np.array([1.5, -2.0]), 0.25, "logistic", 1e-4)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.weights, model.weights)
    assert back.intercept == model.intercept
    assert back.kind == "logistic" and back.ridge_lambda == 1e-4
    json.loads(path.read_text())
