"""Integrated Gradients for the regression network and importance fusion.

Along the straight path from the baseline to x, a ReLU network is piecewise
linear, so the path gradient is piecewise constant and jumps wherever a
hidden pre-activation changes sign. A plain uniform midpoint rule therefore
converges only at rate 1/steps. By default the uniform grid is refined with
those switching points, which makes the midpoint rule exact on every cell;
with ``kink_aware=False`` the plain uniform rule is used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .neuralnet import MlpModel, forward_raw, input_gradient_batch
from .numkit import as_finite_vector


@dataclass(frozen=True)
class AttributionConfig:
    """``baseline=None`` means the all-zero vector in standardized feature space,
    i.e. the training feature means in raw units."""

    baseline: tuple[float, ...] | None = None
    steps: int = 50
    lam: float = 0.5
    kink_aware: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInputError("steps must be at least 1")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError("lambda must lie in [0, 1]")
        if self.baseline is not None:
            object.__setattr__(self, "baseline", tuple(float(v) for v in self.baseline))

    def baseline_vector(self, dim: int) -> np.ndarray:
        if self.baseline is None:
            return np.zeros(dim)
        b = np.asarray(self.baseline, dtype=np.float64)
        if b.shape != (dim,):
            raise InvalidInputError(f"baseline has length {b.size}, expected {dim}")
        return b


def path_kinks(model: MlpModel, base: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Sorted path positions in (0, 1) where some hidden pre-activation crosses zero.

    Layer by layer: between consecutive switching points of the earlier
    layers every pre-activation of the current layer is affine in the path
    position, so its zeros are located by linear interpolation between sign
    changes at those points.
    """
    points = np.array([0.0, 1.0])
    for layer in range(len(model.weights) - 1):
        _, (pre, _, _) = forward_raw(model, base + points[:, None] * delta)
        h = pre[layer]
        a0, a1 = points[:-1, None], points[1:, None]
        h0, h1 = h[:-1], h[1:]
        cross = (h0 * h1) < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = a0 + (a1 - a0) * h0 / (h0 - h1)
        found = roots[cross]
        if found.size:
            points = np.unique(np.concatenate([points, found[(found > 0) & (found < 1)]]))
    return points[1:-1]


def integrated_gradients(model: MlpModel, x, config: AttributionConfig = AttributionConfig()) -> np.ndarray:
    """Straight-line path attribution from the baseline to x.

    Midpoint rule on ``steps`` equal cells: gradients of the deterministic
    (dropout-free) network are averaged at ``baseline + (j - 0.5) / m * (x -
    baseline)``. With ``kink_aware`` (the default) the cells are further
    split at the ReLU switching points and each sub-cell is weighted by its
    width, which is exact for piecewise-linear networks.
    """
    x = as_finite_vector(x, "x")
    base = config.baseline_vector(x.size)
    delta = x - base
    if not np.any(delta):
        return np.zeros_like(x)
    m = config.steps
    edges = np.arange(m + 1) / m
    if config.kink_aware:
        edges = np.unique(np.concatenate([edges, path_kinks(model, base, delta)]))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    grads = input_gradient_batch(model, base + mids[:, None] * delta)
    if not config.kink_aware:
        return delta * grads.mean(axis=0)
    return delta * (widths @ grads)


def _l1_normalized(v: np.ndarray) -> np.ndarray:
    total = v.sum()
    return v / total if total > 0 else np.zeros_like(v)


def combined_importance(xgb_imp, ig, lam: float) -> np.ndarray:
    """Convex blend ``lam * xgb + (1 - lam) * |ig|`` of the two L1-normalized vectors.

    If one of the inputs is all-zero the other one receives the full weight,
    so the result sums to 1 unless both are all-zero.
    """
    xgb_imp = as_finite_vector(xgb_imp, "xgb_imp")
    ig = as_finite_vector(ig, "ig")
    if xgb_imp.shape != ig.shape:
        raise InvalidInputError(f"importance length mismatch: {xgb_imp.size} vs {ig.size}")
    if np.any(xgb_imp < 0):
        raise InvalidInputError("tree importances must be non-negative")
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError("lambda must lie in [0, 1]")
    tree_part = _l1_normalized(xgb_imp)
    grad_part = _l1_normalized(np.abs(ig))
    if not tree_part.any():
        return grad_part
    if not grad_part.any():
        return tree_part
    return lam * tree_part + (1.0 - lam) * grad_part
