"""Three-phase training, per-sample inference, evaluation and persistence.

Training:
  1. a ``meta_fraction`` share of the training rows is held out; the tree
     ensemble and the network are fitted on the rest,
  2. on the held-out rows the base predictions, confidences, Integrated
     Gradients and fused importances are assembled into meta-features,
  3. the gate is fitted on those meta-features.

Base learners are not refitted after the gate is trained. The network's
point prediction is always its Monte Carlo mean, including for the
network-only baseline. Each sample's dropout masks are seeded from the model
seed and a hash of the raw feature bytes, so predictions are reproducible.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .attribution import AttributionConfig, combined_importance, integrated_gradients
from .errors import DmlError, InvalidInputError, ModelParseError, UnsupportedFormatError
from .gbrt import GbrtConfig, GbrtModel, Tree, confidence_xgb_batch, fit_gbrt, gbrt_predict_batch
from .metalearner import (CLASS_NAMES, GateProbabilities, build_meta_matrix, combine, fit_gate,
                          gate_probabilities, meta_feature_dim, weights_from_probabilities)
from .neuralnet import MlpConfig, MlpModel, fit_mlp, mc_predict
from .numkit import (Dataset, SplitSpec, Standardizer, regression_metrics, split_indices,
                     standardize_fit)

log = logging.getLogger(__name__)

FORMAT_NAME = "dml-ensemble-model"
FORMAT_VERSION = 1
MODEL_NAMES = ("gbrt", "nn", "simple_average", "dml")


class TrainingError(DmlError):
    """A failure inside one training phase; the original error is chained."""

    def __init__(self, phase: str, cause: Exception):
        super().__init__(f"[{phase}] {cause}")
        self.phase = phase


@dataclass(frozen=True)
class DmlConfig:
    gbrt: GbrtConfig = field(default_factory=GbrtConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    gate_hidden: tuple[int, ...] = (128, 64)
    gate_epochs: int = 100
    mc_samples: int = 100
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    alpha: float = 0.01
    meta_fraction: float = 0.25
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "gate_hidden", tuple(int(h) for h in self.gate_hidden))
        if not 0.0 < self.meta_fraction < 1.0:
            raise InvalidInputError("meta_fraction must lie in (0, 1)")
        if self.mc_samples < 1 or self.gate_epochs < 0:
            raise InvalidInputError("mc_samples must be >= 1 and gate_epochs >= 0")
        if self.alpha < 0:
            raise InvalidInputError("alpha must be non-negative")

    def with_seed(self, seed: int) -> "DmlConfig":
        return replace(self, seed=seed, gbrt=replace(self.gbrt, seed=seed),
                       mlp=replace(self.mlp, seed=seed))


@dataclass(frozen=True)
class DmlModel:
    gbrt: GbrtModel
    mlp: MlpModel
    gate: MlpModel
    feature_standardizer: Standardizer
    meta_standardizer: Standardizer
    attribution: AttributionConfig
    feature_names: tuple[str, ...]
    mc_samples: int
    seed: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        D = len(self.feature_names)
        dims = {
            "tree features": self.gbrt.n_features,
            "network inputs": self.mlp.input_dim,
            "feature standardizer": len(self.feature_standardizer.means),
        }
        for what, d in dims.items():
            if d != D:
                raise InvalidInputError(f"{what} has dimension {d}, expected {D}")
        if self.gate.input_dim != meta_feature_dim(D) or len(self.meta_standardizer.means) != meta_feature_dim(D):
            raise InvalidInputError(f"gate input must have dimension {meta_feature_dim(D)}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class PredictionReport:
    prediction: float
    y_xgb: float
    y_nn: float
    p: GateProbabilities
    w_xgb: float
    w_nn: float
    c_xgb: float
    c_nn: float
    importance: np.ndarray


def sample_seed(seed: int, x_raw: np.ndarray) -> int:
    """Stable 64-bit seed from the model seed and the raw feature bytes."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    h.update(np.ascontiguousarray(x_raw, dtype="<f8").tobytes())
    return int.from_bytes(h.digest(), "little")


@dataclass
class _BaseOutputs:
    y_xgb: np.ndarray
    y_nn: np.ndarray
    c_xgb: np.ndarray
    c_nn: np.ndarray
    importance: np.ndarray


def _base_outputs(gbrt, mlp, attribution, X_raw, X_std, mc_samples, seed) -> _BaseOutputs:
    n = X_raw.shape[0]
    y_nn = np.empty(n)
    c_nn = np.empty(n)
    importance = np.empty_like(X_std)
    for i in range(n):
        mc = mc_predict(mlp, X_std[i], mc_samples, sample_seed(seed, X_raw[i]))
        y_nn[i] = mc.mean
        c_nn[i] = mc.variance
        ig = integrated_gradients(mlp, X_std[i], attribution)
        importance[i] = combined_importance(gbrt.gain_importance, ig, attribution.lam)
    return _BaseOutputs(gbrt_predict_batch(gbrt, X_std), y_nn,
                        confidence_xgb_batch(gbrt, X_std), c_nn, importance)


def _phase(name, fn, *args, **kwargs):
    log.info("phase %s: start", name)
    try:
        out = fn(*args, **kwargs)
    except DmlError as exc:
        raise TrainingError(name, exc) from exc
    log.info("phase %s: done", name)
    return out


def train_dml(train: Dataset, config: DmlConfig = DmlConfig()) -> DmlModel:
    scaler = standardize_fit(train)
    X_std = scaler.transform(train.features)
    base_idx, meta_idx = split_indices(train.n_samples, SplitSpec(1.0 - config.meta_fraction, config.seed))
    if len(base_idx) == 0 or len(meta_idx) == 0:
        raise InvalidInputError(f"{train.n_samples} rows cannot be split for meta-learning")
    log.info("base-train rows: %d, meta rows: %d", len(base_idx), len(meta_idx))
    base = Dataset(X_std[base_idx], train.targets[base_idx], train.feature_names)

    gbrt = _phase("gbrt", fit_gbrt, base, config.gbrt)
    mlp = _phase("mlp", fit_mlp, base, config.mlp)

    def meta_features():
        out = _base_outputs(gbrt, mlp, config.attribution, train.features[meta_idx],
                            X_std[meta_idx], config.mc_samples, config.seed)
        Z = build_meta_matrix(X_std[meta_idx], out.c_xgb, out.c_nn, out.importance, out.y_xgb, out.y_nn)
        return out, Z

    out, Z = _phase("meta-features", meta_features)
    meta_scaler = standardize_fit(Z)
    gate = _phase("gate", fit_gate, meta_scaler.transform(Z), out.y_xgb, out.y_nn,
                  train.targets[meta_idx], epochs=config.gate_epochs, alpha=config.alpha,
                  seed=config.seed, hidden_sizes=config.gate_hidden,
                  batch_size=config.mlp.batch_size, learning_rate=config.mlp.learning_rate,
                  momentum=config.mlp.momentum)
    return DmlModel(gbrt, mlp, gate, scaler, meta_scaler, config.attribution,
                    train.feature_names, config.mc_samples, config.seed)


def _check_rows(model: DmlModel, X_raw) -> np.ndarray:
    X = np.asarray(X_raw, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InvalidInputError(f"expected {model.n_features} features, got {X.shape[-1] if X.ndim else 0}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("input contains non-finite values")
    return X


@dataclass
class BatchPrediction:
    """Column-wise results for n samples; row i corresponds to `PredictionReport` i."""

    prediction: np.ndarray
    y_xgb: np.ndarray
    y_nn: np.ndarray
    probabilities: np.ndarray
    weights: np.ndarray
    c_xgb: np.ndarray
    c_nn: np.ndarray
    importance: np.ndarray

    def __len__(self):
        return len(self.prediction)

    def report(self, i: int) -> PredictionReport:
        return PredictionReport(
            float(self.prediction[i]), float(self.y_xgb[i]), float(self.y_nn[i]),
            GateProbabilities(*map(float, self.probabilities[i])),
            float(self.weights[i, 0]), float(self.weights[i, 1]),
            float(self.c_xgb[i]), float(self.c_nn[i]), self.importance[i].copy(),
        )


def predict_batch(model: DmlModel, X_raw) -> BatchPrediction:
    X_raw = _check_rows(model, X_raw)
    X_std = model.feature_standardizer.transform(X_raw)
    out = _base_outputs(model.gbrt, model.mlp, model.attribution, X_raw, X_std,
                        model.mc_samples, model.seed)
    Z = build_meta_matrix(X_std, out.c_xgb, out.c_nn, out.importance, out.y_xgb, out.y_nn)
    P = gate_probabilities(model.gate, model.meta_standardizer.transform(Z))
    W = weights_from_probabilities(P)
    pred = combine(P, out.y_xgb, out.y_nn)
    return BatchPrediction(pred, out.y_xgb, out.y_nn, P, W, out.c_xgb, out.c_nn, out.importance)


def predict_dml(model: DmlModel, x_raw) -> PredictionReport:
    x = np.asarray(x_raw, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("predict_dml expects a single feature vector")
    return predict_batch(model, x).report(0)


def baseline_predictions(batch: BatchPrediction) -> dict[str, np.ndarray]:
    return {
        "gbrt": batch.y_xgb,
        "nn": batch.y_nn,
        "simple_average": 0.5 * (batch.y_xgb + batch.y_nn),
        "dml": batch.prediction,
    }


def evaluate(model: DmlModel, test: Dataset, batch: BatchPrediction | None = None) -> dict[str, dict[str, float]]:
    """rmse/mae/r2 for the tree model, the network, their plain average, and the gated ensemble."""
    if batch is None:
        batch = predict_batch(model, test.features)
    return {name: regression_metrics(pred, test.targets)
            for name, pred in baseline_predictions(batch).items()}


def selection_stats(model: DmlModel, data: Dataset | np.ndarray, batch: BatchPrediction | None = None) -> dict:
    """Per-option mean and (population) std of gate probabilities plus argmax shares."""
    if batch is None:
        X = data.features if isinstance(data, Dataset) else data
        batch = predict_batch(model, X)
    P = batch.probabilities
    if len(P) == 0:
        raise InvalidInputError("selection statistics need at least one sample")
    counts = np.bincount(np.argmax(P, axis=1), minlength=len(CLASS_NAMES))
    means = P.mean(axis=0)
    stds = P.std(axis=0)
    return {
        name: {"mean": float(means[c]), "std": float(stds[c]),
               "argmax_share": float(counts[c] / len(P)), "argmax_count": int(counts[c])}
        for c, name in enumerate(CLASS_NAMES)
    }


# -- persistence -------------------------------------------------------------
#
# The model file is a JSON document. Every real number is written with
# float.hex(), which round-trips the binary value exactly; arrays are stored
# as {"shape": [...], "data": [hex, ...]} in row-major order.

def _enc(arr) -> dict:
    a = np.asarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": [float(v).hex() for v in a.ravel()]}


def _dec(obj) -> np.ndarray:
    data = np.array([float.fromhex(v) for v in obj["data"]], dtype=np.float64)
    return data.reshape(obj["shape"])


def _enc_net(net: MlpModel) -> dict:
    return {
        "dropout_rate": float(net.dropout_rate).hex(),
        "weights": [_enc(w) for w in net.weights],
        "biases": [_enc(b) for b in net.biases],
        "output_scale": _enc(net.output_scale),
        "output_shift": _enc(net.output_shift),
    }


def _dec_net(obj) -> MlpModel:
    return MlpModel(tuple(_dec(w) for w in obj["weights"]), tuple(_dec(b) for b in obj["biases"]),
                    float.fromhex(obj["dropout_rate"]), _dec(obj["output_scale"]), _dec(obj["output_shift"]))


def _enc_tree(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "threshold": _enc(tree.threshold),
        "value": _enc(tree.value),
    }


def _dec_tree(obj) -> Tree:
    return Tree(np.array(obj["feature"], dtype=np.int64), _dec(obj["threshold"]),
                np.array(obj["left"], dtype=np.int64), np.array(obj["right"], dtype=np.int64),
                _dec(obj["value"]))


def model_to_dict(model: DmlModel) -> dict:
    att = model.attribution
    return {
        "format": FORMAT_NAME,
        "format_version": model.format_version,
        "feature_names": list(model.feature_names),
        "seed": model.seed,
        "mc_samples": model.mc_samples,
        "attribution": {
            "baseline": None if att.baseline is None else _enc(att.baseline),
            "steps": att.steps,
            "lambda": float(att.lam).hex(),
            "kink_aware": att.kink_aware,
        },
        "feature_standardizer": {"means": _enc(model.feature_standardizer.means),
                                 "stds": _enc(model.feature_standardizer.stds)},
        "meta_standardizer": {"means": _enc(model.meta_standardizer.means),
                              "stds": _enc(model.meta_standardizer.stds)},
        "gbrt": {
            "base_score": float(model.gbrt.base_score).hex(),
            "learning_rate": float(model.gbrt.learning_rate).hex(),
            "gain_importance": _enc(model.gbrt.gain_importance),
            "trees": [_enc_tree(t) for t in model.gbrt.trees],
        },
        "mlp": _enc_net(model.mlp),
        "gate": _enc_net(model.gate),
    }


def model_from_dict(doc: dict) -> DmlModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise UnsupportedFormatError(f"not a {FORMAT_NAME} document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"unsupported format_version {version!r}; this build reads {FORMAT_VERSION}")
    try:
        att = doc["attribution"]
        attribution = AttributionConfig(
            None if att["baseline"] is None else tuple(_dec(att["baseline"])),
            int(att["steps"]), float.fromhex(att["lambda"]), bool(att["kink_aware"]))
        g = doc["gbrt"]
        gbrt = GbrtModel(float.fromhex(g["base_score"]), tuple(_dec_tree(t) for t in g["trees"]),
                         float.fromhex(g["learning_rate"]), _dec(g["gain_importance"]))
        fs, ms = doc["feature_standardizer"], doc["meta_standardizer"]
        return DmlModel(
            gbrt=gbrt,
            mlp=_dec_net(doc["mlp"]),
            gate=_dec_net(doc["gate"]),
            feature_standardizer=Standardizer(_dec(fs["means"]), _dec(fs["stds"])),
            meta_standardizer=Standardizer(_dec(ms["means"]), _dec(ms["stds"])),
            attribution=attribution,
            feature_names=tuple(doc["feature_names"]),
            mc_samples=int(doc["mc_samples"]),
            seed=int(doc["seed"]),
            format_version=version,
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelParseError(f"malformed model document: {exc!r}") from exc


def save_model(model: DmlModel, path) -> None:
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="ascii")


def load_model(path) -> DmlModel:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ModelParseError("model file is not ASCII text", offset=exc.start) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"invalid model file: {exc.msg}", offset=exc.pos) from exc
    return model_from_dict(doc)
