"""Seeded synthetic regression datasets for offline runs and tests.

* ``linear``     y = affine function of 5 uniform features
* ``tree``       y = a fixed depth-2 axis-aligned tree over 4 uniform features
* ``two-regime`` 8 uniform features plus a 0/1 ``regime`` column; regime 0
  rows follow an axis-aligned step function of 4 features, regime 1 rows a
  smooth function of an oblique combination of all 8 plus an interaction.
  Exactly half the rows fall in each regime (regime 0 gets the extra row
  for odd n), in shuffled order.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .numkit import Dataset, make_rng

KINDS = ("linear", "tree", "two-regime")

LINEAR_WEIGHTS = np.array([1.5, -2.0, 0.5, 3.0, -1.0])
LINEAR_INTERCEPT = 0.25
TWO_REGIME_DIM = 8


def linear_target(X):
    return X @ LINEAR_WEIGHTS + LINEAR_INTERCEPT


def tree_target(X):
    left = np.where(X[:, 1] <= 0.5, 1.0, 3.0)
    right = np.where(X[:, 2] <= -0.2, -2.0, 0.0)
    return np.where(X[:, 0] <= 0.0, left, right)


def step_target(X):
    return (2.0 * (X[:, 0] > 0.0) - 1.5 * (X[:, 1] > 0.4)
            + 1.0 * (X[:, 2] < -0.3) * (X[:, 3] > 0.0) - 0.75)


def smooth_target(X):
    return 1.5 * np.tanh(0.5 * X.sum(axis=1)) + 0.4 * X[:, 0] * X[:, 1]


def make_synthetic(kind: str, n_rows: int, noise_std: float = 0.0, seed: int = 0) -> Dataset:
    if kind not in KINDS:
        raise InvalidInputError(f"unknown synthetic kind {kind!r}; choose from {', '.join(KINDS)}")
    if n_rows < 1:
        raise InvalidInputError("n_rows must be at least 1")
    if noise_std < 0:
        raise InvalidInputError("noise_std must be non-negative")
    rng = make_rng(seed)
    if kind == "linear":
        X = rng.uniform(-1.0, 1.0, size=(n_rows, 5))
        y = linear_target(X)
        names = [f"x{i}" for i in range(5)]
    elif kind == "tree":
        X = rng.uniform(-1.0, 1.0, size=(n_rows, 4))
        y = tree_target(X)
        names = [f"x{i}" for i in range(4)]
    else:
        U = rng.uniform(-1.0, 1.0, size=(n_rows, TWO_REGIME_DIM))
        regime = rng.permutation(np.arange(n_rows) % 2).astype(np.float64)
        y = np.where(regime == 0.0, step_target(U), smooth_target(U))
        X = np.column_stack([U, regime])
        names = [f"x{i}" for i in range(TWO_REGIME_DIM)] + ["regime"]
    y = y + noise_std * rng.normal(size=n_rows)
    return Dataset(X, y, tuple(names))
