"""Fully connected regression network: tanh hidden layers, sigmoid outputs,
full-batch gradient descent with classical momentum on mean squared error."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class NetworkSpec:
    layer_widths: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise ValueError("a network needs an input and an output width")
        if min(self.layer_widths) < 1:
            raise ValueError(f"layer widths must be >= 1: {self.layer_widths}")

    @property
    def n_weight_layers(self) -> int:
        return len(self.layer_widths) - 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.8
    epochs: int = 900

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class NetworkParams:
    """Per layer weight (fan_out x fan_in) and bias (fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1], *(w.shape[0] for w in self.weights))

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def to_dict(self) -> dict:
        return {"layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(self.weights, self.biases)]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        weights, biases = [], []
        for layer in d["layers"]:
            w = np.asarray(layer["weight"], dtype=float)
            weights.append(w.reshape(len(layer["weight"]), -1))
            biases.append(np.asarray(layer["bias"], dtype=float))
        return cls(weights, biases)


@dataclass
class TrainResult:
    params: NetworkParams
    losses: list[float] = field(default_factory=list)

    def save_losses(self, path: str | Path) -> None:
        write_loss_trace(path, self.losses)


PRESETS = {
    # name: (hidden layers, hidden width, epochs, default output width)
    "OFDF-DNN": (9, 50, 900, 1),
    "SRMT-DNN": (8, 30, 2600, 4),
}


def preset(name: str, input_width: int, output_width: int | None = None, *,
           hidden_layers: int | None = None, seed: int = 0) -> tuple[NetworkSpec, TrainConfig]:
    """Network and training settings for the named task.

    The layer count counts weight layers, so "10 layers" is nine tanh
    hidden layers plus the sigmoid output layer. Override with
    ``hidden_layers``.
    """
    key = name.upper()
    if key not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    n_hidden, width, epochs, default_out = PRESETS[key]
    if hidden_layers is not None:
        n_hidden = hidden_layers
    out = default_out if output_width is None else output_width
    if input_width < 1 or out < 1:
        raise ValueError("input and output widths must be >= 1")
    spec = NetworkSpec((input_width, *([width] * n_hidden), out), seed)
    return spec, TrainConfig(learning_rate=0.01, momentum=0.8, epochs=epochs)


def init(spec: NetworkSpec) -> NetworkParams:
    """Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activations(params: NetworkParams, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    h = X
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W.T + b
        h = _sigmoid(z) if l == last else np.tanh(z)
        acts.append(h)
    return acts


def forward(params: NetworkParams, x) -> np.ndarray:
    """Network output for one row (1-D input) or a batch (2-D input)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    if X.shape[1] != params.weights[0].shape[1]:
        raise ValueError(f"input width {X.shape[1]} does not match network input {params.weights[0].shape[1]}")
    out = _activations(params, X)[-1]
    return out[0] if single else out


def _check_batch(params: NetworkParams, X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"{X.shape[0]} input rows but {Y.shape[0]} target rows")
    if X.shape[1] != params.weights[0].shape[1]:
        raise ValueError(f"input width {X.shape[1]} does not match network input {params.weights[0].shape[1]}")
    if Y.shape[1] != params.weights[-1].shape[0]:
        raise ValueError(f"target width {Y.shape[1]} does not match network output {params.weights[-1].shape[0]}")
    return X, Y


def loss(params: NetworkParams, X, Y) -> float:
    X, Y = _check_batch(params, X, Y)
    return float(np.mean((_activations(params, X)[-1] - Y) ** 2))


def _loss_and_gradient(params: NetworkParams, X: np.ndarray, Y: np.ndarray) -> tuple[float, NetworkParams]:
    acts = _activations(params, X)
    out = acts[-1]
    err = out - Y
    value = float(np.mean(err ** 2))
    delta = (2.0 / err.size) * err * out * (1.0 - out)
    gw: list[np.ndarray] = [None] * len(params.weights)
    gb: list[np.ndarray] = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ params.weights[l]) * (1.0 - acts[l] ** 2)
    return value, NetworkParams(gw, gb)


def gradient(params: NetworkParams, X, Y) -> NetworkParams:
    """Analytic gradient of the mean squared error over all rows and outputs."""
    X, Y = _check_batch(params, X, Y)
    return _loss_and_gradient(params, X, Y)[1]


def train(spec: NetworkSpec, cfg: TrainConfig, X, Y, params: NetworkParams | None = None) -> TrainResult:
    """Full-batch momentum descent: v <- mu*v - lr*g ; theta <- theta + v.

    The returned loss trace has ``epochs + 1`` entries, the first being the
    loss at initialization.
    """
    params = init(spec) if params is None else params.copy()
    if params.layer_widths != spec.layer_widths:
        raise ValueError(f"params widths {params.layer_widths} do not match spec {spec.layer_widths}")
    X, Y = _check_batch(params, X, Y)
    if Y.min() < 0.0 or Y.max() > 1.0:
        raise ValueError("targets must be scaled into [0, 1] for the sigmoid output layer")
    vw = [np.zeros_like(w) for w in params.weights]
    vb = [np.zeros_like(b) for b in params.biases]
    lr, mu = cfg.learning_rate, cfg.momentum
    losses = []
    for _ in range(cfg.epochs):
        value, g = _loss_and_gradient(params, X, Y)
        losses.append(value)
        for l in range(len(params.weights)):
            vw[l] = mu * vw[l] - lr * g.weights[l]
            vb[l] = mu * vb[l] - lr * g.biases[l]
            params.weights[l] = params.weights[l] + vw[l]
            params.biases[l] = params.biases[l] + vb[l]
    losses.append(loss(params, X, Y))
    return TrainResult(params, losses)


def write_loss_trace(path: str | Path, losses: Sequence[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for epoch, value in enumerate(losses):
            w.writerow([epoch, repr(float(value))])


def save_params(path: str | Path, params: NetworkParams) -> None:
    Path(path).write_text(json.dumps(params.to_dict()) + "\n", encoding="utf-8")


def load_params(path: str | Path) -> NetworkParams:
    with open(path, encoding="utf-8") as fh:
        return NetworkParams.from_dict(json.load(fh))
