"""Gradient-boosted regression trees with exact greedy split search.

Squared-error boosting: every tree is fitted to the residuals of the current
ensemble, leaves hold the mean residual of their samples, and each tree's
output is shrunk by the learning rate before it is added.

Split candidates are midpoints between consecutive distinct sorted feature
values. Among candidates whose gain is within a tiny relative tolerance of
the best one, the lowest feature index wins, then the lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .numkit import Dataset, as_finite_vector

LEAF = -1
# gains closer than this fraction of the node's total squared error count as ties
TIE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class GbrtConfig:
    n_estimators: int = 150
    learning_rate: float = 0.08
    max_depth: int = 8
    min_samples_leaf: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise InvalidInputError("n_estimators must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidInputError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise InvalidInputError("max_depth must be positive")
        if self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be positive")


@dataclass(frozen=True)
class Tree:
    """A regression tree in flat array form.

    Node 0 is the root. For an internal node ``feature >= 0`` and samples with
    ``x[feature] <= threshold`` go to ``left``; leaves have ``feature == -1``
    and carry their (unshrunk) mean residual in ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature != LEAF))

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat != LEAF
            if not active.any():
                return node
            r = rows[active]
            n = node[active]
            go_left = X[r, feat[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class GbrtModel:
    base_score: float
    trees: tuple[Tree, ...]
    learning_rate: float
    gain_importance: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return len(self.gain_importance)


@dataclass
class _SplitChoice:
    feature: int
    threshold: float
    gain: float


def find_best_split(X, residuals, orders, min_samples_leaf):
    """Best squared-error split of one node, or None if no split helps.

    ``orders[d]`` lists the node's sample indices sorted by feature d.
    The gain of a split is the reduction in the sum of squared deviations,
    S_L^2/n_L + S_R^2/n_R - S^2/n.
    """
    n = orders.shape[1]
    if n < 2 * min_samples_leaf:
        return None
    r_node = residuals[orders[0]]
    total = r_node.sum()
    sse = float(np.sum((r_node - total / n) ** 2))
    if sse <= 0.0:
        return None

    lo, hi = min_samples_leaf, n - min_samples_leaf
    n_left = np.arange(lo, hi + 1, dtype=np.float64)
    per_feature = []
    for d in range(orders.shape[0]):
        xs = X[orders[d], d]
        cum = np.cumsum(residuals[orders[d]])
        # candidate k puts the first k sorted samples on the left
        s_left = cum[lo - 1:hi]
        s_right = total - s_left
        gains = s_left**2 / n_left + s_right**2 / (n - n_left) - total**2 / n
        valid = xs[lo - 1:hi] < xs[lo:hi + 1]
        gains = np.where(valid, gains, -np.inf)
        per_feature.append((gains, xs))

    best = max(float(g.max()) for g, _ in per_feature)
    if not np.isfinite(best):
        return None
    tol = TIE_TOLERANCE * sse
    if best <= tol:
        return None
    for d, (gains, xs) in enumerate(per_feature):
        hits = np.flatnonzero(gains >= best - tol)
        if hits.size:
            k = hits[0] + lo
            threshold = 0.5 * (xs[k - 1] + xs[k])
            return _SplitChoice(d, float(threshold), float(gains[hits[0]]))
    return None


def _grow_tree(X, residuals, max_depth, min_samples_leaf, importance):
    n, D = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    root_orders = np.argsort(X, axis=0, kind="stable").T.copy()
    stack = [(new_node(), root_orders, 0)]
    goes_left = np.zeros(n, dtype=bool)
    while stack:
        node, orders, depth = stack.pop()
        idx = orders[0]
        value[node] = float(residuals[idx].mean())
        if depth >= max_depth:
            continue
        split = find_best_split(X, residuals, orders, min_samples_leaf)
        if split is None:
            continue
        importance[split.feature] += split.gain
        goes_left[idx] = X[idx, split.feature] <= split.threshold
        left_orders = np.stack([o[goes_left[o]] for o in orders])
        right_orders = np.stack([o[~goes_left[o]] for o in orders])
        goes_left[idx] = False
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = new_node()
        right[node] = new_node()
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], right_orders, depth + 1))
        stack.append((left[node], left_orders, depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def fit_gbrt(train: Dataset, config: GbrtConfig = GbrtConfig(), callback=None) -> GbrtModel:
    """Fit ``config.n_estimators`` trees by greedy squared-error boosting.

    The split search is exhaustive and deterministic, so ``config.seed`` does
    not influence the result; it is kept for interface symmetry with the
    other learners. ``callback(k, predictions)`` is invoked after each tree.
    """
    X, y = train.features, train.targets
    if train.n_samples < 2 * config.min_samples_leaf:
        raise InvalidInputError(
            f"need at least {2 * config.min_samples_leaf} rows for min_samples_leaf="
            f"{config.min_samples_leaf}, got {train.n_samples}"
        )
    base = float(y.mean())
    pred = np.full(len(y), base)
    importance = np.zeros(train.n_features)
    trees = []
    for k in range(config.n_estimators):
        tree = _grow_tree(X, y - pred, config.max_depth, config.min_samples_leaf, importance)
        trees.append(tree)
        pred = pred + config.learning_rate * tree.predict(X)
        if callback is not None:
            callback(k, pred)
    total = importance.sum()
    if total > 0:
        importance = importance / total
    return GbrtModel(base, tuple(trees), config.learning_rate, importance)


def _as_matrix(model: GbrtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InvalidInputError(f"expected {model.n_features} features, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("input contains non-finite values")
    return X


def per_tree_contributions_batch(model: GbrtModel, X) -> np.ndarray:
    """(n, K) matrix of shrunken per-tree outputs; base score excluded."""
    X = _as_matrix(model, X)
    out = np.empty((X.shape[0], model.n_trees))
    for k, tree in enumerate(model.trees):
        out[:, k] = model.learning_rate * tree.predict(X)
    return out


def per_tree_contributions(model: GbrtModel, x) -> np.ndarray:
    x = as_finite_vector(x, "x")
    return per_tree_contributions_batch(model, x)[0]


def gbrt_predict_batch(model: GbrtModel, X) -> np.ndarray:
    return model.base_score + per_tree_contributions_batch(model, X).sum(axis=1)


def gbrt_predict(model: GbrtModel, x) -> float:
    x = as_finite_vector(x, "x")
    return float(gbrt_predict_batch(model, x)[0])


def confidence_xgb_batch(model: GbrtModel, X) -> np.ndarray:
    return per_tree_contributions_batch(model, X).var(axis=1)


def confidence_xgb(model: GbrtModel, x) -> float:
    """Population variance of the shrunken per-tree contributions at x."""
    return float(np.var(per_tree_contributions(model, x)))
