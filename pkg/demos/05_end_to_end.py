"""Train the full ensemble on two-regime data and compare it with its parts.

Half the rows follow a step function, which trees fit well. The other half
follow a smooth oblique function, which the network fits better. The gate
should lean on the trees in the first regime.
"""
from dml_ensemble import DmlConfig, evaluate, predict_batch, selection_stats, train_dml
from dml_ensemble.numkit import SplitSpec, train_test_split
from dml_ensemble.synth import make_synthetic

data = make_synthetic("two-regime", 4000, noise_std=0.1, seed=7)
train, test = train_test_split(data, SplitSpec(0.8, 42))
model = train_dml(train, DmlConfig())

batch = predict_batch(model, test.features)
for name, m in evaluate(model, test, batch).items():
    print(f"{name:15s} rmse {m['rmse']:.4f}  mae {m['mae']:.4f}  r2 {m['r2']:.4f}")

regime = test.features[:, data.feature_names.index("regime")]
print(f"mean w_xgb: step regime {batch.weights[regime == 0, 0].mean():.3f}, "
      f"smooth regime {batch.weights[regime == 1, 0].mean():.3f}")
for name, s in selection_stats(model, test, batch).items():
    print(f"p_{name}: mean {s['mean']:.3f}  std {s['std']:.3f}  argmax share {s['argmax_share']:.3f}")

r = batch.report(0)
print(f"first test row: y_xgb {r.y_xgb:.3f}, y_nn {r.y_nn:.3f}, w_xgb {r.w_xgb:.3f} -> {r.prediction:.3f}")
