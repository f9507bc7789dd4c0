"""Fully-connected ReLU network with inverted dropout.

Layer l computes ``a_l = dropout(relu(W_l a_{l-1} + b_l))`` for every hidden
layer and the output layer is affine. Dropout is never applied to the input.
Inverted dropout scales surviving activations by ``1 / (1 - rate)`` during
stochastic passes, so the deterministic pass uses no mask and no rescaling.

Training uses mini-batch gradient descent with momentum 0.9 on mean squared
error; targets are standardized internally and the stored output affine map
undoes that, so callers always see predictions in target units. The same
optimizer (`train_network`) drives the gating network of the meta-learner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergedTrainingError, InvalidInputError
from .numkit import Dataset, as_finite_vector, make_rng


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (128, 64, 32)
    dropout_rate: float = 0.3
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise InvalidInputError("hidden sizes must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInputError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError("learning_rate must be positive and momentum in [0, 1)")


@dataclass(frozen=True)
class MlpModel:
    """Weights are stored as (fan_out, fan_in) matrices.

    ``output_scale`` and ``output_shift`` map the raw network output back to
    target units: ``y = raw * output_scale + output_shift``.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    dropout_rate: float = 0.0
    output_scale: np.ndarray | None = None
    output_shift: np.ndarray | None = None

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        if not ws or len(ws) != len(bs):
            raise InvalidInputError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidInputError(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i and w.shape[1] != ws[i - 1].shape[0]:
                raise InvalidInputError(f"layer {i}: fan-in {w.shape[1]} != {ws[i - 1].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {i}: non-finite parameters")
        k = ws[-1].shape[0]
        scale = np.ones(k) if self.output_scale is None else np.array(self.output_scale, dtype=np.float64)
        shift = np.zeros(k) if self.output_shift is None else np.array(self.output_shift, dtype=np.float64)
        for arr in (*ws, *bs, scale, shift):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "output_scale", scale)
        object.__setattr__(self, "output_shift", shift)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def with_parameters(self, weights, biases) -> "MlpModel":
        return MlpModel(weights, biases, self.dropout_rate, self.output_scale, self.output_shift)


def init_mlp(input_dim, hidden_sizes, output_dim=1, seed=0, dropout_rate=0.0, zero_output=False):
    """He-initialized network: N(0, 2 / fan_in) weights, zero biases."""
    rng = make_rng(seed, 0)
    sizes = [int(input_dim), *map(int, hidden_sizes), int(output_dim)]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if zero_output:
        weights[-1] = np.zeros_like(weights[-1])
    return MlpModel(tuple(weights), tuple(biases), dropout_rate)


def draw_masks(model: MlpModel, n: int, rng: np.random.Generator):
    """One inverted-dropout mask per hidden layer, each of shape (n, width)."""
    keep = 1.0 - model.dropout_rate
    return [(rng.random((n, h)) < keep) / keep for h in model.hidden_sizes]


def forward_raw(model: MlpModel, X: np.ndarray, masks=None):
    """Forward pass before the output affine map. Returns (outputs, cache)."""
    pre, acts = [], [X]
    a = X
    for layer, (w, b) in enumerate(zip(model.weights[:-1], model.biases[:-1])):
        h = a @ w.T + b
        a = np.maximum(h, 0.0)
        if masks is not None:
            a = a * masks[layer]
        pre.append(h)
        acts.append(a)
    out = a @ model.weights[-1].T + model.biases[-1]
    return out, (pre, acts, masks)


def backward_raw(model: MlpModel, cache, grad_out: np.ndarray, need_params=True):
    """Reverse-mode pass for a loss whose gradient w.r.t. raw outputs is ``grad_out``.

    Returns ``(weight_grads, bias_grads, input_grad)``; ReLU has derivative 0 at 0.
    """
    pre, acts, masks = cache
    L = len(model.weights)
    gw, gb = [None] * L, [None] * L
    g = grad_out
    for layer in range(L - 1, -1, -1):
        if need_params:
            gw[layer] = g.T @ acts[layer]
            gb[layer] = g.sum(axis=0)
        g = g @ model.weights[layer]
        if layer > 0:
            if masks is not None:
                g = g * masks[layer - 1]
            g = g * (pre[layer - 1] > 0.0)
    return gw, gb, g


def _as_rows(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise InvalidInputError(f"expected input dimension {model.input_dim}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("input contains non-finite values")
    return X


def mlp_forward_batch(model: MlpModel, X) -> np.ndarray:
    """Deterministic outputs, shape (n,) for scalar networks and (n, k) otherwise."""
    out, _ = forward_raw(model, _as_rows(model, X))
    out = out * model.output_scale + model.output_shift
    return out[:, 0] if model.output_dim == 1 else out


def mlp_forward(model: MlpModel, x):
    x = as_finite_vector(x, "x")
    out = mlp_forward_batch(model, x)[0]
    return float(out) if model.output_dim == 1 else out


def stochastic_forward(model: MlpModel, X, rng: np.random.Generator) -> np.ndarray:
    """One dropout-active pass with a fresh mask per row and per layer."""
    X = _as_rows(model, X)
    out, _ = forward_raw(model, X, draw_masks(model, X.shape[0], rng))
    out = out * model.output_scale + model.output_shift
    return out[:, 0] if model.output_dim == 1 else out


@dataclass(frozen=True)
class McPrediction:
    samples: np.ndarray
    mean: float
    variance: float

    @classmethod
    def from_samples(cls, samples) -> "McPrediction":
        s = np.asarray(samples, dtype=np.float64)
        if np.all(s == s[0]):
            return cls(s, float(s[0]), 0.0)
        m = float(s.mean())
        return cls(s, m, float(np.mean((s - m) ** 2)))


def mc_predict(model: MlpModel, x, T: int = 100, seed: int = 0) -> McPrediction:
    """T dropout-active passes at x; deterministic for a given (seed, T)."""
    if T < 1:
        raise InvalidInputError("T must be at least 1")
    x = as_finite_vector(x, "x")
    if model.dropout_rate == 0.0:
        return McPrediction.from_samples(np.full(T, mlp_forward(model, x)))
    rows = np.broadcast_to(x, (T, x.size))
    return McPrediction.from_samples(stochastic_forward(model, rows, make_rng(seed)))


def confidence_nn(mc: McPrediction) -> float:
    return mc.variance


def input_gradient_batch(model: MlpModel, X) -> np.ndarray:
    X = _as_rows(model, X)
    if model.output_dim != 1:
        raise InvalidInputError("input gradients are defined for scalar-output networks")
    _, cache = forward_raw(model, X)
    grad_out = np.full((X.shape[0], 1), model.output_scale[0])
    return backward_raw(model, cache, grad_out, need_params=False)[2]


def input_gradient(model: MlpModel, x) -> np.ndarray:
    """Exact gradient of the deterministic output with respect to x."""
    x = as_finite_vector(x, "x")
    return input_gradient_batch(model, x)[0]


def train_network(model: MlpModel, X, loss_and_grad, epochs, batch_size, learning_rate,
                  momentum, seed, callback=None) -> MlpModel:
    """Mini-batch momentum descent shared by the regression net and the gate.

    ``loss_and_grad(raw_out, batch_index)`` returns the batch loss and its
    gradient with respect to the raw network outputs. Dropout masks are drawn
    when the model has a nonzero rate. ``callback(epoch, model)`` runs after
    every epoch.
    """
    rng = make_rng(seed, 1)
    ws = [w.copy() for w in model.weights]
    bs = [b.copy() for b in model.biases]
    vw = [np.zeros_like(w) for w in ws]
    vb = [np.zeros_like(b) for b in bs]
    # shares the arrays updated in place below
    work = _unchecked(ws, bs, model.dropout_rate)
    # overflow shows up as a non-finite loss, reported below
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(model, work, X, ws, bs, vw, vb, rng, loss_and_grad, epochs, batch_size,
                        learning_rate, momentum, callback)


def _descend(model, work, X, ws, bs, vw, vb, rng, loss_and_grad, epochs, batch_size,
             learning_rate, momentum, callback):
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            masks = draw_masks(work, len(idx), rng) if work.dropout_rate > 0 else None
            out, cache = forward_raw(work, X[idx], masks)
            loss, grad = loss_and_grad(out, idx)
            total += loss * len(idx)
            gw, gb, _ = backward_raw(work, cache, grad)
            for i in range(len(ws)):
                vw[i] *= momentum
                vw[i] -= learning_rate * gw[i]
                ws[i] += vw[i]
                vb[i] *= momentum
                vb[i] -= learning_rate * gb[i]
                bs[i] += vb[i]
        if not np.isfinite(total) or not all(np.all(np.isfinite(w)) for w in ws):
            raise DivergedTrainingError(f"training diverged at epoch {epoch + 1}", epoch=epoch + 1)
        if callback is not None:
            callback(epoch, model.with_parameters(ws, bs))
    return model.with_parameters(ws, bs)


def _unchecked(ws, bs, rate) -> MlpModel:
    m = object.__new__(MlpModel)
    object.__setattr__(m, "weights", tuple(ws))
    object.__setattr__(m, "biases", tuple(bs))
    object.__setattr__(m, "dropout_rate", rate)
    return m


def fit_mlp(train: Dataset, config: MlpConfig = MlpConfig(), callback=None) -> MlpModel:
    """Train a scalar regression network on (already standardized) features."""
    X, y = train.features, train.targets
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    t = ((y - y_mean) / y_std)[:, None]

    def mse(out, idx):
        diff = out - t[idx]
        return float(np.mean(diff**2)), 2.0 * diff / len(idx)

    model = init_mlp(train.n_features, config.hidden_sizes, 1, config.seed, config.dropout_rate)
    model = MlpModel(model.weights, model.biases, config.dropout_rate, [y_std], [y_mean])
    if config.epochs == 0:
        return model
    return train_network(model, X, mse, config.epochs, config.batch_size,
                         config.learning_rate, config.momentum, config.seed, callback)
