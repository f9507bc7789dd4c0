"""Boosted regression trees on a noiseless tree-shaped target.

Shows the fitted first split, how the prediction decomposes into the base
score plus per-tree contributions, and the spread of those contributions
that the ensemble later uses as a confidence signal.
"""
import numpy as np

from dml_ensemble.gbrt import (GbrtConfig, confidence_xgb, fit_gbrt, gbrt_predict,
                               per_tree_contributions)
from dml_ensemble.numkit import r2, train_test_split, SplitSpec
from dml_ensemble.synth import make_synthetic

data = make_synthetic("tree", 800, noise_std=0.0, seed=1)
train, test = train_test_split(data, SplitSpec(0.8, 0))
model = fit_gbrt(train, GbrtConfig(n_estimators=60, learning_rate=0.3, max_depth=3))

first = model.trees[0]
print(f"first tree splits {data.feature_names[first.feature[0]]} at {first.threshold[0]:.3f}")
print("gain importance:", {n: round(float(v), 3) for n, v in zip(data.feature_names, model.gain_importance)})

x = test.features[0]
parts = per_tree_contributions(model, x)
print(f"base {model.base_score:.3f} + sum of {len(parts)} tree outputs = {model.base_score + parts.sum():.4f}"
      f" (predict: {gbrt_predict(model, x):.4f})")
print(f"contribution variance at this point: {confidence_xgb(model, x):.5f}")

pred = np.array([gbrt_predict(model, row) for row in test.features])
print(f"test R^2 = {r2(pred, test.targets):.4f}")
