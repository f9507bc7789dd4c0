"""Command-line front end.

Data goes to standard output as CSV, progress and summaries to standard
error. Exit codes: 0 success, 1 usage error, 2 data/schema error,
3 training error, 4 persistence error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import csvio
from .config import RunConfig, load_run_config
from .errors import (DivergedTrainingError, InvalidInputError, ModelParseError, SchemaError,
                     UndefinedMetricError, UnsupportedFormatError)
from .metalearner import CLASS_NAMES
from .numkit import SplitSpec, split_indices, train_test_split
from .pipeline import (MODEL_NAMES, TrainingError, evaluate, load_model, predict_batch, save_model,
                       selection_stats, train_dml)
from .synth import KINDS, make_synthetic

log = logging.getLogger("dml_ensemble")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING, EXIT_PERSISTENCE = 0, 1, 2, 3, 4

# reference selection-probability means, printed next to ours for comparison only
REFERENCE_SELECTION_MEANS = {"xgb": 0.485, "nn": 0.335, "hybrid": 0.180}

PREDICT_COLUMNS = ("prediction", "y_xgb", "y_nn", "p_xgb", "p_nn", "p_hybrid",
                   "w_xgb", "w_nn", "c_xgb", "c_nn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _f6(v) -> str:
    return f"{v:.6f}"


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "meta_fraction": args.meta_fraction,
        "alpha": args.alpha,
        "attribution.lambda": args.lam,
        "mc_samples": args.mc_samples,
        "attribution.steps": args.ig_steps,
    }


def _run_config(args) -> RunConfig:
    try:
        cfg = load_run_config(args.config, _overrides(args))
    except OSError as exc:
        raise UsageError(f"cannot read config file {args.config}: {exc.strerror or exc}") from exc
    for key, value in cfg.effective_items():
        log.info("config %s = %s", key, value)
    return cfg


def cmd_train(args, out) -> int:
    cfg = _run_config(args)
    data = csvio.read_dataset(args.data, args.target_col)
    model = train_dml(data, cfg.dml)
    save_model(model, args.model)
    n_base = len(split_indices(data.n_samples, SplitSpec(1.0 - cfg.dml.meta_fraction, cfg.dml.seed))[0])
    summary = [("rows", data.n_samples), ("features", data.n_features),
               ("base_rows", n_base), ("meta_rows", data.n_samples - n_base),
               ("meta_feature_dim", model.gate.input_dim), ("model_file", args.model)]
    summary += [(f"phase.{p}", "ok") for p in ("gbrt", "mlp", "meta-features", "gate")]
    summary += [(f"config.{k}", v) for k, v in cfg.effective_items()]
    log.info("trained on %d rows (%d base / %d meta), model written to %s",
             data.n_samples, n_base, data.n_samples - n_base, args.model)
    w = _writer(out)
    w.writerow(["key", "value"])
    w.writerows(summary)
    return EXIT_OK


def cmd_compare(args, out) -> int:
    cfg = _run_config(args)
    data = csvio.read_dataset(args.data, args.target_col)
    train, test = train_test_split(data, SplitSpec(cfg.train_fraction, cfg.dml.seed))
    log.info("split: %d train / %d test rows", train.n_samples, test.n_samples)
    model = train_dml(train, cfg.dml)
    metrics = evaluate(model, test)
    w = _writer(out)
    w.writerow(["model", "rmse", "mae", "r2"])
    for name in MODEL_NAMES:
        m = metrics[name]
        w.writerow([name, _f6(m["rmse"]), _f6(m["mae"]), _f6(m["r2"])])
    return EXIT_OK


def _load_features(args, model):
    X, names = csvio.read_features(args.data, args.target_col)
    if len(names) != model.n_features:
        raise SchemaError(f"model expects D={model.n_features} features, file has D={len(names)}")
    return X


def cmd_predict(args, out) -> int:
    model = load_model(args.model)
    X = _load_features(args, model)
    w = _writer(out)
    w.writerow(PREDICT_COLUMNS)
    if len(X) == 0:
        return EXIT_OK
    batch = predict_batch(model, X)
    cols = np.column_stack([batch.prediction, batch.y_xgb, batch.y_nn, batch.probabilities,
                            batch.weights, batch.c_xgb, batch.c_nn])
    # full precision so each row's recombination can be checked exactly
    w.writerows([repr(float(v)) for v in row] for row in cols)
    return EXIT_OK


def cmd_inspect(args, out) -> int:
    model = load_model(args.model)
    X = _load_features(args, model)
    if len(X) == 0:
        raise SchemaError(f"{args.data}: no data rows")
    batch = predict_batch(model, X)
    stats = selection_stats(model, X, batch)
    importance = batch.importance.mean(axis=0)
    w = _writer(out)
    w.writerow(["section", "name", "mean", "std", "argmax_share", "reference_mean"])
    for name in CLASS_NAMES:
        s = stats[name]
        # full precision: the three means must sum to one when read back
        w.writerow(["selection", name, repr(s["mean"]), repr(s["std"]), repr(s["argmax_share"]),
                    _f6(REFERENCE_SELECTION_MEANS[name])])
    for name, v in zip(model.feature_names, importance):
        w.writerow(["importance", name, _f6(v), "", "", ""])
    return EXIT_OK


def cmd_synth(args, out) -> int:
    if args.kind not in KINDS:
        raise UsageError(f"unknown kind {args.kind!r}; choose from {', '.join(KINDS)}")
    data = make_synthetic(args.kind, args.n_rows, args.noise_std, args.seed or 0)
    csvio.write_dataset(data, args.out, args.target_col)
    log.info("wrote %d rows of %s data to %s", data.n_samples, args.kind, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dml-ensemble", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        if data:
            p.add_argument("data", help="CSV file with a header row")
        p.add_argument("--target-col", default="target")
        p.add_argument("--seed", type=int)

    def tuning(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--meta-fraction", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--mc-samples", type=int)
        p.add_argument("--ig-steps", type=int)

    p = sub.add_parser("train", help="train a model and write it to --model")
    common(p)
    tuning(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="split, train and report the four-way metrics table")
    common(p)
    tuning(p)
    p.set_defaults(func=cmd_compare)

    for name, func, text in (("predict", cmd_predict, "per-row predictions"),
                             ("inspect", cmd_inspect, "selection statistics and importances")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--model", required=True)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    common(p, data=False)
    p.add_argument("--kind", required=True)
    p.add_argument("--n-rows", type=int, required=True)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (TrainingError, DivergedTrainingError)):
        return EXIT_TRAINING
    if isinstance(exc, (ModelParseError, UnsupportedFormatError, OSError)):
        return EXIT_PERSISTENCE
    if isinstance(exc, (SchemaError, InvalidInputError, UndefinedMetricError)):
        return EXIT_DATA
    return EXIT_USAGE


def _configure_logging():
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging()
    out_path = getattr(args, "out", None) if args.command in ("predict", "inspect") else None
    try:
        if out_path:
            with open(out_path, "w", newline="", encoding="utf-8") as fh:
                return args.func(args, fh)
        return args.func(args, sys.stdout)
    except UsageError as exc:
        print(f"dml-ensemble: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, DivergedTrainingError, ModelParseError, UnsupportedFormatError,
            SchemaError, InvalidInputError, UndefinedMetricError, OSError) as exc:
        print(f"dml-ensemble: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
