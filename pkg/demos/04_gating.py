"""The gating network on constructed meta-sets.

One base model is exact and the other is noise. Without the KL term the
gate puts almost all weight on the exact model. A large KL weight keeps it
close to uniform.
"""
import numpy as np

from dml_ensemble.metalearner import fit_gate, gate_probabilities, weights_from_probabilities

rng = np.random.default_rng(0)
y = rng.normal(size=500)
noise = rng.normal(size=500)
Z = np.column_stack([rng.normal(size=(500, 4)), y, noise])

for alpha in (0.0, 0.01, 1.0, 100.0):
    gate = fit_gate(Z, y, noise, y, epochs=100, alpha=alpha, seed=1)
    P = gate_probabilities(gate, Z)
    W = weights_from_probabilities(P)
    print(f"alpha={alpha:<6} mean p={np.round(P.mean(axis=0), 3)}  mean w_xgb={W[:, 0].mean():.3f}")
