"""From-scratch numeric core: seeded RNG streams, a small multilayer
perceptron with manual backpropagation, and the plain downstream models
(logistic regression by gradient descent, linear/ridge regression in closed
form).

Randomness policy: every stochastic routine takes an explicit integer seed or
a `numpy.random.Generator`. Generators use numpy's PCG64. Independent child
streams come from `derive_rng`, which hashes (seed, *labels) into a
SeedSequence, so a given (seed, purpose) pair always maps to the same stream
and unrelated purposes never share one.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "softmax")

PROB_CLIP = 1e-12


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite; carries the epoch index."""

    def __init__(self, message: str, epoch: int, trace=None):
        super().__init__(message)
        self.epoch = epoch
        self.trace = trace


class SingularSystemError(RuntimeError):
    """Raised when a normal-equations system is singular at ridge_lambda=0."""


# ---------------------------------------------------------------------------
# randomness


def _label_entropy(label) -> int:
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """PCG64 generator for (seed, labels...); same arguments, same stream."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_label_entropy(l) for l in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# activations and losses


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_sum_exp(z):
    m = z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]


def squared_error(pred, target):
    """Mean-over-rows squared error; returns (loss, gradient w.r.t. pred)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    n = pred.shape[0]
    diff = pred - target
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


def binary_cross_entropy(probs, y):
    """Mean cross-entropy of probabilities against 0/1 labels.

    Probabilities are clamped to [1e-12, 1-1e-12] inside the loss only; the
    gradient is with respect to the (clamped) probabilities, for use behind a
    sigmoid output.
    """
    probs = np.asarray(probs, dtype=float)
    y = np.asarray(y, dtype=float).reshape(probs.shape)
    n = probs.shape[0]
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    loss = -np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)) / n
    grad = (p - y) / (p * (1.0 - p)) / n
    return float(loss), grad


def softmax_cross_entropy(logits, onehot):
    """Fused softmax + cross-entropy on logits (log-sum-exp form).

    Returns (loss, gradient w.r.t. logits); pair with an identity-output
    network instead of an explicit softmax output.
    """
    logits = np.asarray(logits, dtype=float)
    onehot = np.asarray(onehot, dtype=float)
    n = logits.shape[0]
    loss = float(np.sum(log_sum_exp(logits) - np.sum(logits * onehot, axis=1)) / n)
    grad = (softmax(logits) - onehot) / n
    return loss, grad


# ---------------------------------------------------------------------------
# multilayer perceptron


@dataclass
class Mlp:
    """Fully connected net; weights[l] has shape (dims[l], dims[l+1])."""

    dims: tuple
    weights: list
    biases: list
    hidden_activation: str = "tanh"
    output_activation: str = "identity"


def mlp_init(dims, hidden_activation="tanh", output_activation="identity", rng=None) -> Mlp:
    """Scaled-uniform init: W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need >= 2 positive layer dims, got {dims}")
    if hidden_activation not in HIDDEN_ACTIVATIONS:
        raise ValueError(f"unknown hidden activation {hidden_activation!r}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"unknown output activation {output_activation!r}")
    if rng is None:
        rng = derive_rng(0, "mlp-init")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        scale = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases, hidden_activation, output_activation)


def n_parameters(net: Mlp) -> int:
    return sum(w.size + b.size for w, b in zip(net.weights, net.biases))


def _hidden(net: Mlp, z):
    return np.tanh(z) if net.hidden_activation == "tanh" else np.maximum(z, 0.0)


def mlp_forward(net: Mlp, X):
    """Forward pass; returns (cache, output). The cache feeds mlp_backward."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.dims[0]:
        raise ValueError(f"input has shape {X.shape}, net expects (n, {net.dims[0]})")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input to mlp_forward")
    activations = [X]
    pre = []
    a = X
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre.append(z)
        if l < last:
            a = _hidden(net, z)
        elif net.output_activation == "sigmoid":
            a = sigmoid(z)
        elif net.output_activation == "softmax":
            a = softmax(z)
        else:
            a = z
        activations.append(a)
    return (activations, pre), activations[-1]


def mlp_backward(net: Mlp, cache, output_grad):
    """Backpropagate d(loss)/d(output) through the net.

    Returns (param_grads, input_grad) where param_grads is a list of (dW, db)
    matching net.weights/net.biases, and input_grad is d(loss)/d(input) --
    needed to couple networks (the debiaser feeds one net's input gradient
    into another's output).
    """
    activations, pre = cache
    if len(activations) != len(net.weights) + 1:
        raise ValueError("cache does not match network depth")
    g = np.asarray(output_grad, dtype=float)
    out = activations[-1]
    if g.shape != out.shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {out.shape}")
    if net.output_activation == "sigmoid":
        dz = g * out * (1.0 - out)
    elif net.output_activation == "softmax":
        dz = out * (g - np.sum(g * out, axis=1, keepdims=True))
    else:
        dz = g
    param_grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = activations[l]
        param_grads[l] = (a_prev.T @ dz, dz.sum(axis=0))
        da = dz @ net.weights[l].T
        if l > 0:
            if net.hidden_activation == "tanh":
                dz = da * (1.0 - activations[l] ** 2)
            else:
                dz = da * (pre[l - 1] > 0.0)
        else:
            dz = da
    return param_grads, dz


def sgd_step(net: Mlp, param_grads, lr: float) -> None:
    for (w, b), (dw, db) in zip(zip(net.weights, net.biases), param_grads):
        w -= lr * dw
        b -= lr * db


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def adam_init(net: Mlp) -> AdamState:
    return AdamState(
        m=[(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)],
        v=[(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)],
    )


def adam_step(net: Mlp, param_grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    b1t = 1.0 - beta1 ** state.t
    b2t = 1.0 - beta2 ** state.t
    for l, (dw, db) in enumerate(param_grads):
        for params, grad, m, v in (
            (net.weights[l], dw, state.m[l][0], state.v[l][0]),
            (net.biases[l], db, state.m[l][1], state.v[l][1]),
        ):
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            params -= lr * (m / b1t) / (np.sqrt(v / b2t) + eps)


# ---------------------------------------------------------------------------
# downstream linear models


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    batch_size: int = 0  # 0 = full batch (the only mode the fitters use)
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    kind: str  # "linear" | "logistic"
    ridge_lambda: float = 0.0
    loss_history: list = field(default_factory=list, repr=False, compare=False)
    train_config: dict = field(default_factory=dict, repr=False, compare=False)


def fit_logistic(X, y, cfg: TrainConfig) -> LinearModel:
    """Full-batch gradient descent on mean cross-entropy + l2*||w||^2.

    The intercept is never regularized. Deterministic: zero init, fixed epoch
    count. Raises TrainingDivergedError if the loss stops being finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    classes = set(np.unique(y))
    if not classes <= {0.0, 1.0}:
        raise ValueError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise ValueError("labels are single-class; nothing to fit")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    history = []
    for epoch in range(cfg.epochs):
        z = X @ w + b
        p = sigmoid(z)
        pc = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
        loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)) + cfg.l2 * w @ w)
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"logistic training loss became non-finite at epoch {epoch}", epoch
            )
        history.append(loss)
        grad_w = X.T @ (p - y) / n + 2.0 * cfg.l2 * w
        grad_b = float(np.mean(p - y))
        w -= cfg.learning_rate * grad_w
        b -= cfg.learning_rate * grad_b
    echo = {"learning_rate": cfg.learning_rate, "epochs": cfg.epochs, "l2": cfg.l2, "seed": cfg.seed}
    return LinearModel(w, float(b), "logistic", cfg.l2, history, echo)


def fit_linear(X, y, ridge_lambda: float = 0.0) -> LinearModel:
    """Closed-form ridge: minimize ||Xw + b - y||^2 + ridge_lambda*||w||^2.

    Centering X and y leaves the intercept unpenalized. At ridge_lambda=0 a
    singular Gram matrix raises SingularSystemError (use a positive lambda).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc + ridge_lambda * np.eye(X.shape[1])
    try:
        cond = np.linalg.cond(gram)
        if not math.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        w = np.linalg.solve(gram, Xc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "normal equations are singular; refit with ridge_lambda > 0"
        ) from exc
    b = y_mean - float(x_mean @ w)
    return LinearModel(w, b, "linear", ridge_lambda, train_config={"ridge_lambda": ridge_lambda})


def predict(model: LinearModel, X) -> np.ndarray:
    """Probabilities for logistic models, raw values for linear models."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError(f"X has shape {X.shape}, model expects (n, {model.weights.shape[0]})")
    z = X @ model.weights + model.intercept
    return sigmoid(z) if model.kind == "logistic" else z


# ---------------------------------------------------------------------------
# metrics


def accuracy(probs, labels, threshold: float = 0.5) -> float:
    probs = np.asarray(probs, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if probs.shape != labels.shape:
        raise ValueError(f"length mismatch: {probs.shape} vs {labels.shape}")
    return float(np.mean((probs >= threshold) == (labels == 1.0)))


def r_squared(preds, y) -> float:
    preds = np.asarray(preds, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if preds.shape != y.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {y.shape}")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("constant y: R^2 undefined")
    ss_res = float(np.sum((y - preds) ** 2))
    return 1.0 - ss_res / ss_tot


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) formula, tie-averaged."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"length mismatch: {scores.shape} vs {labels.shape}")
    pos = labels == 1.0
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# model persistence


def save_model(model: LinearModel, path) -> None:
    from .ioutil import write_json

    write_json(
        path,
        {
            "kind": model.kind,
            "n_features": int(model.weights.shape[0]),
            "weights": [float(v) for v in model.weights],
            "intercept": float(model.intercept),
            "ridge_lambda": float(model.ridge_lambda),
            "train_config": model.train_config,
        },
    )


def load_model(path) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return LinearModel(
        np.asarray(data["weights"], dtype=float),
        float(data["intercept"]),
        data["kind"],
        float(data.get("ridge_lambda", 0.0)),
        train_config=data.get("train_config", {}),
    )
