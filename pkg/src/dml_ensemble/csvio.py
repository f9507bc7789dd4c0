"""Comma-separated dataset files with a header row.

Every column except the target is parsed as a real-valued feature, in header
order. Row numbers in error messages are 1-based file lines (the header is
line 1).
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .numkit import Dataset


def _read_rows(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise SchemaError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if r]
    return header, body


def _parse_matrix(header, body, columns):
    out = np.empty((len(body), len(columns)))
    for k, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"expected {len(header)} fields, found {len(row)}", row=line)
        for j, c in enumerate(columns):
            cell = row[c].strip()
            try:
                v = float(cell)
            except ValueError:
                raise SchemaError(f"non-numeric value {cell!r}", row=line, column=header[c]) from None
            if not math.isfinite(v):
                raise SchemaError(f"non-finite value {cell!r}", row=line, column=header[c])
            out[k, j] = v
    return out


def read_dataset(path, target_col: str = "target") -> Dataset:
    header, body = _read_rows(path)
    if target_col not in header:
        raise SchemaError(f"target column {target_col!r} not found in header of {path}")
    t = header.index(target_col)
    feats = [j for j in range(len(header)) if j != t]
    if not feats:
        raise SchemaError(f"{path}: no feature columns besides {target_col!r}")
    if not body:
        raise SchemaError(f"{path}: no data rows")
    M = _parse_matrix(header, body, feats + [t])
    return Dataset(M[:, :-1], M[:, -1], tuple(header[j] for j in feats))


def read_features(path, target_col: str = "target") -> tuple[np.ndarray, tuple[str, ...]]:
    """Feature matrix for prediction; a target column, if present, is ignored.

    A header-only file yields a (0, D) matrix.
    """
    header, body = _read_rows(path)
    feats = [j for j, h in enumerate(header) if h != target_col]
    return _parse_matrix(header, body, feats), tuple(header[j] for j in feats)


def write_dataset(data: Dataset, path, target_col: str = "target") -> None:
    """Write features then the target; values use repr so they round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, target_col])
        for x, y in zip(data.features, data.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
