"""Monte Carlo dropout: a spread of predictions from one trained network.

Points far outside the training range usually get a wider spread than
points inside it.
"""
import numpy as np

from dml_ensemble.neuralnet import MlpConfig, fit_mlp, mc_predict, mlp_forward
from dml_ensemble.numkit import Dataset, standardize_fit
from dml_ensemble.synth import make_synthetic

raw = make_synthetic("linear", 1000, noise_std=0.05, seed=2)
scaler = standardize_fit(raw)
data = Dataset(scaler.transform(raw.features), raw.targets, raw.feature_names)
net = fit_mlp(data, MlpConfig(hidden_sizes=(64, 32), epochs=60, dropout_rate=0.3))

inside = data.features[0]
outside = inside + 6.0
for label, x in (("inside", inside), ("far outside", outside)):
    mc = mc_predict(net, x, T=200, seed=0)
    print(f"{label:12s} deterministic {mlp_forward(net, x):8.3f}  MC mean {mc.mean:8.3f}  "
          f"variance {mc.variance:.4f}")

# the same seed gives the same samples
a, b = mc_predict(net, inside, 50, seed=7), mc_predict(net, inside, 50, seed=7)
print("repeatable:", np.array_equal(a.samples, b.samples))
