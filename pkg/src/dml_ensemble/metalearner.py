"""Meta-features, the softmax gating network, and its training loss.

Meta-feature layout (length 2D + 4)::

    [ x (D) | c_xgb | c_nn | fused importance (D) | y_xgb | y_nn ]

The gate maps a standardized meta-feature vector to probabilities for three
options: the tree model, the network, and the hybrid (equal-weight average).
The hybrid probability is split evenly between the two base models when the
final weights are formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import InvalidInputError
from .neuralnet import MlpModel, backward_raw, forward_raw, init_mlp, mlp_forward_batch, train_network
from .numkit import as_finite_vector, softmax

N_OPTIONS = 3
CLASS_NAMES = ("xgb", "nn", "hybrid")
# columns of the three options in the combination matrix [y_xgb, y_nn, (y_xgb + y_nn) / 2]
_MIX = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]])


def meta_feature_dim(n_features: int) -> int:
    return 2 * n_features + 4


def meta_feature_names(feature_names) -> list[str]:
    names = list(feature_names)
    return ([f"x:{n}" for n in names] + ["c_xgb", "c_nn"]
            + [f"importance:{n}" for n in names] + ["y_xgb", "y_nn"])


def build_meta_features(x, c_xgb, c_nn, importance, y_xgb, y_nn) -> np.ndarray:
    x = as_finite_vector(x, "x")
    importance = as_finite_vector(importance, "importance")
    if importance.size != x.size:
        raise InvalidInputError(f"importance has length {importance.size}, expected {x.size}")
    scalars = as_finite_vector([c_xgb, c_nn, y_xgb, y_nn], "meta scalars")
    if scalars[0] < 0 or scalars[1] < 0:
        raise InvalidInputError("confidences must be non-negative")
    return np.concatenate([x, scalars[:2], importance, scalars[2:]])


def build_meta_matrix(X, c_xgb, c_nn, importance, y_xgb, y_nn) -> np.ndarray:
    """Row-wise `build_meta_features` for n samples at once."""
    X = np.asarray(X, dtype=np.float64)
    cols = [np.asarray(v, dtype=np.float64)[:, None] for v in (c_xgb, c_nn, y_xgb, y_nn)]
    Z = np.hstack([X, cols[0], cols[1], np.asarray(importance, dtype=np.float64), cols[2], cols[3]])
    if not np.all(np.isfinite(Z)):
        raise InvalidInputError("meta-features contain non-finite values")
    if np.any(cols[0] < 0) or np.any(cols[1] < 0):
        raise InvalidInputError("confidences must be non-negative")
    return Z


@dataclass(frozen=True)
class GateProbabilities:
    p_xgb: float
    p_nn: float
    p_hybrid: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_xgb, self.p_nn, self.p_hybrid])


def gate_logits(net: MlpModel, Z) -> np.ndarray:
    if net.output_dim != N_OPTIONS:
        raise InvalidInputError(f"gating network must have {N_OPTIONS} outputs, has {net.output_dim}")
    out = mlp_forward_batch(net, Z)
    return out.reshape(-1, N_OPTIONS)


def gate_probabilities(net: MlpModel, Z) -> np.ndarray:
    """(n, 3) probability matrix for standardized meta-features."""
    return softmax(gate_logits(net, Z))


def gate_forward(net: MlpModel, z) -> GateProbabilities:
    z = as_finite_vector(z, "z")
    p = gate_probabilities(net, z)[0]
    return GateProbabilities(*map(float, p))


def weights_from_probabilities(P) -> np.ndarray:
    """(n, 2) matrix of [w_xgb, w_nn]."""
    P = np.asarray(P, dtype=np.float64).reshape(-1, N_OPTIONS)
    return P @ _MIX.T


def gating_weights(p: GateProbabilities) -> tuple[float, float]:
    w_xgb = p.p_xgb + 0.5 * p.p_hybrid
    w_nn = p.p_nn + 0.5 * p.p_hybrid
    return w_xgb, w_nn


def combine(P, y_xgb, y_nn) -> np.ndarray:
    """Gate-weighted prediction p_xgb*y_xgb + p_nn*y_nn + p_hybrid*(y_xgb + y_nn)/2.

    Evaluated as ``y_xgb + w_nn * (y_nn - y_xgb)`` so that equal base
    predictions are returned unchanged, then clamped to the interval spanned
    by the two predictions, which the exact value never leaves.
    """
    W = weights_from_probabilities(P)
    y_xgb = np.asarray(y_xgb, dtype=np.float64)
    y_nn = np.asarray(y_nn, dtype=np.float64)
    out = y_xgb + W[:, 1] * (y_nn - y_xgb)
    return np.clip(out, np.minimum(y_xgb, y_nn), np.maximum(y_xgb, y_nn))


def kl_to_uniform(P) -> np.ndarray:
    """KL(p || uniform) per row, with 0 log 0 = 0."""
    P = np.asarray(P, dtype=np.float64).reshape(-1, N_OPTIONS)
    return xlogy(P, N_OPTIONS * P).sum(axis=1)


def meta_loss(P, y_xgb, y_nn, y, alpha: float) -> float:
    """Mean squared error of the combined prediction plus alpha * mean KL to uniform."""
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    P = np.asarray(P, dtype=np.float64).reshape(-1, N_OPTIONS)
    y_xgb, y_nn, y = (np.asarray(v, dtype=np.float64).ravel() for v in (y_xgb, y_nn, y))
    if not (len(P) == len(y_xgb) == len(y_nn) == len(y)) or len(y) == 0:
        raise InvalidInputError("meta_loss batch lengths differ or are empty")
    data = np.mean((combine(P, y_xgb, y_nn) - y) ** 2)
    return float(data + alpha * np.mean(kl_to_uniform(P)))


def meta_loss_logit_grad(logits, y_xgb, y_nn, y, alpha: float):
    """Loss and its gradient with respect to the gate's logits."""
    P = softmax(logits)
    n = len(y)
    options = np.column_stack([y_xgb, y_nn, 0.5 * (y_xgb + y_nn)])
    resid = np.sum(P * options, axis=1) - y
    log_ratio = np.log(np.maximum(N_OPTIONS * P, np.finfo(float).tiny))
    loss = np.mean(resid**2) + alpha * np.mean(np.sum(P * log_ratio, axis=1))
    g_p = (2.0 * resid[:, None] * options + alpha * (log_ratio + 1.0)) / n
    g_logits = P * (g_p - np.sum(P * g_p, axis=1, keepdims=True))
    return float(loss), g_logits


def meta_loss_param_grads(net: MlpModel, Z, y_xgb, y_nn, y, alpha: float):
    """meta_loss of the gate on a batch and its gradients w.r.t. weights and biases."""
    logits, cache = forward_raw(net, np.asarray(Z, dtype=np.float64))
    loss, g = meta_loss_logit_grad(logits, np.asarray(y_xgb), np.asarray(y_nn), np.asarray(y), alpha)
    gw, gb, _ = backward_raw(net, cache, g)
    return loss, gw, gb


def init_gate(input_dim: int, hidden_sizes=(128, 64), seed: int = 0) -> MlpModel:
    """He-initialized gate whose output layer starts at zero, i.e. uniform probabilities."""
    return init_mlp(input_dim, hidden_sizes, N_OPTIONS, seed, 0.0, zero_output=True)


def fit_gate(Z, y_xgb, y_nn, y, epochs: int = 100, alpha: float = 0.01, seed: int = 0,
             hidden_sizes=(128, 64), batch_size: int = 64, learning_rate: float = 1e-3,
             momentum: float = 0.9, callback=None) -> MlpModel:
    """Train the gate on standardized meta-features ``Z``.

    Targets and base predictions are put on the scale of the standardized
    targets before the loss is taken; the combination is affine-equivariant,
    so this changes only the relative weight of the KL term.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y_xgb, y_nn, y = (np.asarray(v, dtype=np.float64).ravel() for v in (y_xgb, y_nn, y))
    if Z.ndim != 2 or len(Z) == 0:
        raise InvalidInputError("meta-set must be a non-empty matrix")
    if not (len(Z) == len(y_xgb) == len(y_nn) == len(y)):
        raise InvalidInputError("meta-set arrays have different lengths")
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    center = float(y.mean())
    scale = float(y.std()) or 1.0
    t_xgb, t_nn, t = ((v - center) / scale for v in (y_xgb, y_nn, y))

    def loss_and_grad(logits, idx):
        return meta_loss_logit_grad(logits, t_xgb[idx], t_nn[idx], t[idx], alpha)

    net = init_gate(Z.shape[1], hidden_sizes, seed)
    return train_network(net, Z, loss_and_grad, epochs, batch_size, learning_rate,
                         momentum, seed, callback)
