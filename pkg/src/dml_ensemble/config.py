"""Flat ``key=value`` run configuration.

One pair per line; ``#`` starts a comment. Unknown keys are rejected and any
key left out keeps its default. Lists are comma separated. Recognized keys::

    seed  train_fraction  meta_fraction  alpha  mc_samples
    gate_hidden  gate_epochs
    gbrt.n_estimators  gbrt.learning_rate  gbrt.max_depth  gbrt.min_samples_leaf
    mlp.hidden_sizes  mlp.dropout_rate  mlp.epochs  mlp.batch_size
    mlp.learning_rate  mlp.momentum
    attribution.steps  attribution.lambda  attribution.baseline  attribution.kink_aware

``seed`` seeds every component. ``attribution.baseline`` is either ``zero``
(standardized-space origin) or a comma-separated list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .attribution import AttributionConfig
from .errors import InvalidInputError
from .gbrt import GbrtConfig
from .neuralnet import MlpConfig
from .pipeline import DmlConfig


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _baseline(text):
    if text.strip().lower() in ("zero", "none", ""):
        return None
    return tuple(float(v) for v in text.split(","))


def _flag(text):
    value = text.strip().lower()
    if value not in ("true", "false", "1", "0", "yes", "no"):
        raise ValueError(text)
    return value in ("true", "1", "yes")


_TOP = {"seed": int, "train_fraction": float, "meta_fraction": float, "alpha": float,
        "mc_samples": int, "gate_hidden": _int_list, "gate_epochs": int}
_NESTED = {
    "gbrt": {"n_estimators": int, "learning_rate": float, "max_depth": int, "min_samples_leaf": int},
    "mlp": {"hidden_sizes": _int_list, "dropout_rate": float, "epochs": int, "batch_size": int,
            "learning_rate": float, "momentum": float},
    "attribution": {"steps": int, "lambda": float, "baseline": _baseline, "kink_aware": _flag},
}
_ATTR_FIELD = {"lambda": "lam"}


@dataclass(frozen=True)
class RunConfig:
    dml: DmlConfig = field(default_factory=DmlConfig)
    train_fraction: float = 0.8

    def effective_items(self) -> list[tuple[str, str]]:
        d = self.dml

        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(str(x) for x in v)
            return "zero" if v is None else str(v)

        items = [("seed", d.seed), ("train_fraction", self.train_fraction),
                 ("meta_fraction", d.meta_fraction), ("alpha", d.alpha),
                 ("mc_samples", d.mc_samples), ("gate_hidden", d.gate_hidden),
                 ("gate_epochs", d.gate_epochs)]
        for key in _NESTED["gbrt"]:
            items.append((f"gbrt.{key}", getattr(d.gbrt, key)))
        for key in _NESTED["mlp"]:
            items.append((f"mlp.{key}", getattr(d.mlp, key)))
        for key in _NESTED["attribution"]:
            items.append((f"attribution.{key}", getattr(d.attribution, _ATTR_FIELD.get(key, key))))
        return [(k, fmt(v)) for k, v in items]


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        conv = _converter(key)
        if conv is None:
            raise InvalidInputError(f"{source}:{lineno}: unknown configuration key {key!r}")
        try:
            values[key] = conv(value)
        except ValueError:
            raise InvalidInputError(f"{source}:{lineno}: bad value {value!r} for {key}") from None
    return values


def _converter(key):
    if key in _TOP:
        return _TOP[key]
    section, _, name = key.partition(".")
    return _NESTED.get(section, {}).get(name)


def build_run_config(values: dict[str, object]) -> RunConfig:
    """Apply parsed values on top of the defaults."""
    sections = {s: {} for s in _NESTED}
    top = {}
    for key, value in values.items():
        if key in _TOP:
            top[key] = value
        else:
            section, _, name = key.partition(".")
            sections[section][_ATTR_FIELD.get(name, name)] = value
    dml = DmlConfig(
        gbrt=GbrtConfig(**sections["gbrt"]),
        mlp=MlpConfig(**sections["mlp"]),
        attribution=AttributionConfig(**sections["attribution"]),
        **{k: v for k, v in top.items() if k not in ("seed", "train_fraction")},
    )
    dml = dml.with_seed(int(top.get("seed", dml.seed)))
    train_fraction = float(top.get("train_fraction", 0.8))
    if not 0.0 < train_fraction < 1.0:
        raise InvalidInputError("train_fraction must lie in (0, 1)")
    return RunConfig(dml, train_fraction)


def load_run_config(path=None, overrides: dict[str, object] | None = None) -> RunConfig:
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_run_config(values)
