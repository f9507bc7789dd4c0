"""Acceptance suite: one PASS/FAIL line per criterion, printed after the run.

Criterion 1 needs the California Housing data as a CSV with a ``target``
column. It is looked up in ``$DML_CALIFORNIA_CSV`` and then
``data/california_housing.csv``; ``scripts/fetch_california_housing.py``
writes the latter. ``$DML_MC_SAMPLES`` lowers the Monte Carlo sample count
for that run.
"""
import csv
import io
import os
from pathlib import Path

import numpy as np
import pytest

from dml_ensemble import DmlConfig, train_dml
from dml_ensemble.attribution import AttributionConfig, integrated_gradients
from dml_ensemble.cli import main
from dml_ensemble.csvio import read_dataset
from dml_ensemble.gbrt import GbrtConfig, fit_gbrt
from dml_ensemble.metalearner import (combine, fit_gate, gate_probabilities, meta_loss,
                                      meta_loss_param_grads, weights_from_probabilities)
from dml_ensemble.neuralnet import MlpModel, input_gradient, mlp_forward
from dml_ensemble.numkit import Dataset, SplitSpec, rmse, train_test_split
from dml_ensemble.pipeline import evaluate, load_model, predict_batch, save_model

from conftest import ACCEPTANCE_LINES
from oracles import (brute_force_root_split, central_difference, min_abs_preactivation,
                     random_relu_net, relative_error)

ROOT = Path(__file__).resolve().parent.parent


def record(number, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, _ = capsys.readouterr()
    return code, list(csv.reader(io.StringIO(out)))


# 1 ---------------------------------------------------------------------------

def _california_csv():
    env = os.environ.get("DML_CALIFORNIA_CSV")
    if env:
        return Path(env)
    return ROOT / "data" / "california_housing.csv"


@pytest.mark.slow
def test_c1_baseline_ordering_on_california_housing(capsys, tmp_path):
    path = _california_csv()
    if not path.is_file():
        record(1, False, f"NOT RUN, dataset missing at {path} "
                         "(run scripts/fetch_california_housing.py or set DML_CALIFORNIA_CSV)")
        pytest.skip(f"California Housing CSV not found at {path}")
    argv = ["compare", path, "--seed", 42]
    if os.environ.get("DML_MC_SAMPLES"):
        argv += ["--mc-samples", os.environ["DML_MC_SAMPLES"]]
    code, table = cli(capsys, *argv)
    assert code == 0
    m = {row[0]: {"rmse": float(row[1]), "r2": float(row[3])} for row in table[1:]}
    dml, avg = m["dml"]["rmse"], m["simple_average"]["rmse"]
    worst = max(m["gbrt"]["rmse"], m["nn"]["rmse"])
    ok = (dml <= avg <= worst and dml < m["gbrt"]["rmse"] and dml < m["nn"]["rmse"]
          and m["gbrt"]["r2"] >= 0.78)
    record(1, ok, "rmse dml={:.4f} avg={:.4f} gbrt={:.4f} nn={:.4f}, gbrt r2={:.4f}".format(
        dml, avg, m["gbrt"]["rmse"], m["nn"]["rmse"], m["gbrt"]["r2"]))
    assert ok


# 2 ---------------------------------------------------------------------------

def test_c2_integrated_gradients_completeness():
    rng = np.random.default_rng(2)
    passed = 0
    worst = 0.0
    for _ in range(100):
        D = int(rng.integers(2, 9))
        hidden = tuple(int(h) for h in rng.integers(4, 33, size=int(rng.integers(1, 4))))
        m = random_relu_net(rng, D, hidden)
        x = rng.normal(size=D) * rng.uniform(0.5, 3.0)
        gap = mlp_forward(m, x) - mlp_forward(m, np.zeros(D))
        resid = abs(integrated_gradients(m, x, AttributionConfig(steps=300)).sum() - gap)
        worst = max(worst, resid)
        passed += resid <= max(1e-3 * abs(gap), 1e-4)

    affine_ok = True
    for _ in range(20):
        D = int(rng.integers(1, 8))
        w, b = rng.normal(size=D), rng.normal()
        m = MlpModel([w[None, :]], [np.array([b])])
        x, base = rng.normal(size=D), rng.normal(size=D)
        ig = integrated_gradients(m, x, AttributionConfig(baseline=tuple(base), steps=1))
        affine_ok &= bool(np.allclose(ig, w * (x - base), rtol=1e-12, atol=1e-12))
    ok = passed >= 99 and affine_ok
    record(2, ok, f"{passed}/100 within tolerance (worst residual {worst:.2e}), "
                  f"affine steps=1 exact: {affine_ok}")
    assert ok


# 3 ---------------------------------------------------------------------------

def _flat(arrays):
    return np.concatenate([a.ravel() for a in arrays])


def _unflat(net, theta):
    out, i = [], 0
    for a in net.weights + net.biases:
        out.append(theta[i:i + a.size].reshape(a.shape))
        i += a.size
    L = len(net.weights)
    return MlpModel(out[:L], out[L:])


def test_c3_gradient_oracles():
    rng = np.random.default_rng(3)
    input_ok = checked = 0
    while checked < 100:
        m = random_relu_net(rng, int(rng.integers(2, 8)), (int(rng.integers(4, 16)), int(rng.integers(3, 10))))
        x = rng.normal(size=m.input_dim)
        if min_abs_preactivation(m, x) < 1e-3:
            continue
        checked += 1
        fd = central_difference(lambda v: mlp_forward(m, v), x, h=1e-4)
        input_ok += relative_error(input_gradient(m, x), fd) < 1e-3

    param_ok = checked = 0
    while checked < 100:
        net = random_relu_net(rng, int(rng.integers(3, 8)), (int(rng.integers(4, 10)), 4), output_dim=3)
        Z = rng.normal(size=(6, net.input_dim))
        if min(min_abs_preactivation(net, z) for z in Z) < 1e-3:
            continue
        checked += 1
        y_x, y_n, y = rng.normal(size=(3, 6))
        alpha = float(rng.choice([0.0, 0.01, 1.0]))
        _, gw, gb = meta_loss_param_grads(net, Z, y_x, y_n, y, alpha)

        def loss(theta):
            return meta_loss(gate_probabilities(_unflat(net, theta), Z), y_x, y_n, y, alpha)

        fd = central_difference(loss, _flat(net.weights + net.biases), h=1e-4)
        param_ok += relative_error(_flat(gw + gb), fd) < 1e-3
    ok = input_ok >= 95 and param_ok >= 95
    record(3, ok, f"input gradient {input_ok}/100, meta_loss parameter gradient {param_ok}/100")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_c4_root_split_matches_exhaustive_search():
    rng = np.random.default_rng(4)
    agree = 0
    for trial in range(50):
        n, D = int(rng.integers(2, 51)), int(rng.integers(1, 5))
        # every other dataset is coarsely quantized so that gain ties occur
        X = rng.integers(0, 4, size=(n, D)).astype(float) if trial % 2 else rng.normal(size=(n, D))
        y = rng.integers(0, 3, size=n).astype(float) if trial % 2 else rng.normal(size=n)
        leaf = int(rng.integers(1, max(2, n // 2) + 1))
        expected = brute_force_root_split(X, y, leaf)
        if n < 2 * leaf:
            agree += expected is None
            continue
        tree = fit_gbrt(Dataset(X, y), GbrtConfig(n_estimators=1, max_depth=1, min_samples_leaf=leaf)).trees[0]
        if expected is None:
            agree += tree.n_splits == 0
        else:
            agree += (tree.n_splits == 1 and tree.feature[0] == expected[0]
                      and tree.threshold[0] == expected[1])
    record(4, agree == 50, f"{agree}/50 root splits equal the exhaustive optimum")
    assert agree == 50


# 5 ---------------------------------------------------------------------------

def _separable(seed, n=500):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    noise = rng.normal(size=n)
    Z = np.column_stack([rng.normal(size=(n, 4)), y, noise])
    return Z, y, noise


def test_c5_gating_sanity():
    Z, y, noise = _separable(50)
    w_x = weights_from_probabilities(gate_probabilities(fit_gate(Z, y, noise, y, alpha=0.0, seed=5), Z))[:, 0].mean()
    Zs = Z[:, [0, 1, 2, 3, 5, 4]]
    w_n = weights_from_probabilities(gate_probabilities(fit_gate(Zs, noise, y, y, alpha=0.0, seed=5), Zs))[:, 1].mean()
    dev = max(np.abs(gate_probabilities(fit_gate(Z, y, noise, y, alpha=100.0, seed=5), Z) - 1 / 3).max(),
              np.abs(gate_probabilities(fit_gate(Zs, noise, y, y, alpha=100.0, seed=5), Zs) - 1 / 3).max())
    ok = w_x > 0.9 and w_n > 0.9 and dev <= 0.05
    record(5, ok, f"alpha=0 mean w_xgb={w_x:.3f}, mirrored mean w_nn={w_n:.3f}; "
                  f"alpha=100 max |p-1/3|={dev:.4f}")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_c6_probability_and_weight_invariants():
    rng = np.random.default_rng(6)
    p_err = w_err = bound_err = 0.0
    total = 0
    while total < 10_000:
        net = random_relu_net(rng, 6, (8, 5), output_dim=3)
        scale = 10.0 ** rng.uniform(-2, 3)
        net = MlpModel([w * (scale if i == 0 else 1.0) for i, w in enumerate(net.weights)], net.biases)
        Z = rng.normal(size=(100, 6))
        y_x, y_n = rng.normal(size=(2, 100)) * 10.0 ** rng.uniform(-3, 3, size=(2, 1))
        P = gate_probabilities(net, Z)
        W = weights_from_probabilities(P)
        pred = combine(P, y_x, y_n)
        p_err = max(p_err, np.abs(P.sum(axis=1) - 1).max())
        w_err = max(w_err, np.abs(W.sum(axis=1) - 1).max())
        lo, hi = np.minimum(y_x, y_n), np.maximum(y_x, y_n)
        bound_err = max(bound_err, np.max(np.maximum(lo - pred, pred - hi)))
        total += len(Z)
    ok = p_err <= 1e-9 and w_err <= 1e-9 and bound_err <= 0.0
    record(6, ok, f"{total} evaluations: max |sum p - 1|={p_err:.1e}, max |w_xgb + w_nn - 1|={w_err:.1e}, "
                  f"max bound violation={max(bound_err, 0.0):.1e}")
    assert ok


# 7-9 share one model trained with the default configuration ----------------

@pytest.fixture(scope="module")
def regime_run(tmp_path_factory):
    work = tmp_path_factory.mktemp("acceptance")
    path = work / "two_regime.csv"
    assert main(["synth", "--kind", "two-regime", "--n-rows", "4000", "--noise-std", "0.1",
                 "--seed", "7", "--out", str(path)]) == 0
    data = read_dataset(path)
    train, test = train_test_split(data, SplitSpec(0.8, 42))
    model = train_dml(train, DmlConfig())
    return work, path, train, test, model


@pytest.mark.slow
def test_c7_determinism_and_persistence(regime_run):
    work, _, train, test, model = regime_run
    file = work / "model.json"
    save_model(model, file)
    in_memory = evaluate(model, test)
    reloaded = evaluate(load_model(file), test)
    second = evaluate(train_dml(train, DmlConfig()), test)
    ok = reloaded == in_memory and second == in_memory
    record(7, ok, f"reloaded evaluate bit-exact: {reloaded == in_memory}; "
                  f"second training run identical: {second == in_memory} "
                  f"(dml rmse {in_memory['dml']['rmse']!r})")
    assert ok


@pytest.mark.slow
def test_c8_two_regime_adaptivity(regime_run):
    _, _, _, test, model = regime_run
    batch = predict_batch(model, test.features)
    regime = test.features[:, model.feature_names.index("regime")]
    w_tree = batch.weights[regime == 0, 0].mean()
    w_smooth = batch.weights[regime == 1, 0].mean()
    m = evaluate(model, test, batch)
    dml, avg = m["dml"]["rmse"], m["simple_average"]["rmse"]
    ok = w_tree - w_smooth > 0.1 and dml <= avg
    record(8, ok, f"mean w_xgb tree regime={w_tree:.3f}, smooth regime={w_smooth:.3f} "
                  f"(gap {w_tree - w_smooth:.3f}); test rmse dml={dml:.4f} <= average={avg:.4f}")
    assert ok


@pytest.mark.slow
def test_c9_selection_statistics_contract(regime_run, capsys):
    work, path, _, test, model = regime_run
    file = work / "inspect_model.json"
    save_model(model, file)
    code, table = cli(capsys, "inspect", path, "--model", file)
    assert code == 0
    sel = [r for r in table[1:] if r[0] == "selection"]
    mean_sum = sum(float(r[2]) for r in sel)

    one = work / "one_row.csv"
    one.write_text("\n".join(path.read_text().splitlines()[:2]) + "\n")
    code1, table1 = cli(capsys, "inspect", one, "--model", file)
    stds = [float(r[3]) for r in table1[1:] if r[0] == "selection"]
    ok = code1 == 0 and abs(mean_sum - 1.0) <= 1e-9 and stds == [0.0, 0.0, 0.0]
    summary = ", ".join(f"{r[1]}={float(r[2]):.3f} (reference {r[5]})" for r in sel)
    record(9, ok, f"means sum to {mean_sum!r}; single-row stds {stds}; {summary}")
    assert ok
