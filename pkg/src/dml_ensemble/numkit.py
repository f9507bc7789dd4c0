"""Numeric substrate: datasets, standardization, splitting, metrics, softmax.

Variances and standard deviations throughout the package use the population
convention (divide by the count), so a single observation has variance 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError


def as_finite_vector(values, name="input") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def make_rng(*seed_parts: int) -> np.random.Generator:
    """Generator owned by a single operation, keyed by one or more integers."""
    return np.random.default_rng(np.random.SeedSequence([int(s) for s in seed_parts]))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.targets, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInputError(f"features must be an N x D matrix with N, D >= 1, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError(f"targets must have length {X.shape[0]}, got shape {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise InvalidInputError(f"expected {X.shape[1]} feature names, got {len(names)}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.targets[index], self.feature_names)

    def with_features(self, features) -> "Dataset":
        return Dataset(features, self.targets, self.feature_names)


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        stds = np.array(self.stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise InvalidInputError("means and stds must be vectors of equal length")
        if not np.all(stds > 0):
            raise InvalidInputError("standard deviations must be strictly positive")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.stds + self.means

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))


def standardize_fit(data) -> Standardizer:
    """Column-wise mean and population std; constant columns get std 1.

    Accepts a `Dataset` or a plain 2-D array.
    """
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError("cannot fit a standardizer on an empty dataset")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # relative threshold: columns whose spread is pure rounding noise count as constant
    scale = np.maximum(np.abs(means), 1.0)
    stds = np.where(stds > 1e-12 * scale, stds, 1.0)
    return Standardizer(means, stds)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise InvalidInputError("seed must be non-negative")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    n_train = int(np.floor(n * spec.train_fraction))
    perm = make_rng(spec.seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded random partition into floor(N * fraction) training rows and the rest."""
    train_idx, test_idx = split_indices(data.n_samples, spec)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise InvalidInputError(
            f"split of {data.n_samples} rows at fraction {spec.train_fraction} leaves an empty side"
        )
    return data.subset(train_idx), data.subset(test_idx)


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise InvalidInputError(f"prediction/truth length mismatch: {p.size} vs {t.size}")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _paired(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(pred, truth) -> float:
    p, t = _paired(pred, truth)
    return float(np.mean(np.abs(p - t)))


def r2(pred, truth) -> float:
    p, t = _paired(pred, truth)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("r2 is undefined for constant truth")
    return 1.0 - float(np.sum((p - t) ** 2)) / ss_tot


def regression_metrics(pred, truth) -> dict[str, float]:
    return {"rmse": rmse(pred, truth), "mae": mae(pred, truth), "r2": r2(pred, truth)}


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis, stabilized by subtracting the row maximum."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("softmax input contains non-finite values")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def population_variance(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(np.mean((v - v.mean()) ** 2))
