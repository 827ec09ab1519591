"""Dataset loading (CSV, LIBSVM) and column standardisation."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    standardized: bool = False

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.float64).ravel()
        if X.ndim != 2:
            raise DataError("features must be a 2-D array")
        if X.shape[0] != y.size:
            raise DataError(f"{X.shape[0]} feature rows but {y.size} labels")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or Inf")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)


def _to_float(token: str, row: int, column: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"cannot parse {token!r} as a number", row=row, column=column) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {token!r}", row=row, column=column)
    return value


def _binary_labels(raw: list[str], numeric: bool) -> np.ndarray:
    keys = [float(v) for v in raw] if numeric else raw
    classes = sorted(set(keys))
    if len(classes) > 2:
        raise DataError(f"binary labels requested but found {len(classes)} classes")
    if len(classes) == 1:
        # a single class maps to +1 when it looks positive, -1 otherwise
        only = classes[0]
        sign = 1.0 if (numeric and only > 0) else -1.0 if numeric else 1.0
        return np.full(len(keys), sign)
    lo = classes[0]
    return np.array([-1.0 if k == lo else 1.0 for k in keys])


def load_csv(path, label_column: int = -1, has_header: bool = False,
             binary: bool = True, name: str | None = None) -> Dataset:
    """Dense CSV loader.

    Row numbers in errors count data rows from 1 (the header is not counted).
    With ``binary`` the two distinct labels are mapped to -1/+1 in sorted
    order (numeric order when all labels parse as numbers).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path} contains no data rows")
    width = len(rows[0])
    if width < 2:
        raise DataError("need at least one feature column and one label column")
    label_idx = label_column % width
    feats, raw_labels = [], []
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"expected {width} columns, found {len(row)}", row=r)
        feats.append([_to_float(tok.strip(), r, c + 1) for c, tok in enumerate(row) if c != label_idx])
        raw_labels.append(row[label_idx].strip())
    numeric = True
    for r, tok in enumerate(raw_labels, start=1):
        try:
            float(tok)
        except ValueError:
            numeric = False
            break
    if binary:
        labels = _binary_labels(raw_labels, numeric)
    elif numeric:
        labels = np.array([_to_float(t, r, label_idx + 1) for r, t in enumerate(raw_labels, start=1)])
    else:
        raise DataError("non-numeric labels need binary=True")
    return Dataset(np.array(feats, dtype=np.float64), labels, name=name or path.stem)


def load_libsvm(path, n_features: int | None = None, name: str | None = None) -> Dataset:
    """LIBSVM sparse text format (1-based, strictly increasing indices), densified."""
    path = Path(path)
    labels, entries = [], []
    width = 0
    with path.open() as fh:
        for r, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            labels.append(_to_float(parts[0], r, 1))
            row, last = [], 0
            for c, tok in enumerate(parts[1:], start=2):
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataError(f"malformed entry {tok!r}", row=r, column=c)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataError(f"bad feature index {idx_s!r}", row=r, column=c) from None
                if idx < 1:
                    raise DataError("feature indices are 1-based; found index < 1", row=r, column=c)
                if idx <= last:
                    raise DataError("feature indices must be strictly increasing", row=r, column=c)
                last = idx
                row.append((idx - 1, _to_float(val_s, r, c)))
            width = max(width, last)
            entries.append(row)
    if not labels:
        raise DataError(f"{path} contains no data rows")
    if n_features is not None:
        if n_features < width:
            raise DataError(f"file uses index {width} but n_features={n_features}")
        width = n_features
    X = np.zeros((len(labels), width))
    for i, row in enumerate(entries):
        for j, v in row:
            X[i, j] = v
    return Dataset(X, np.array(labels), name=name or path.stem)


def save_libsvm(dataset: Dataset, path) -> None:
    """Write nonzero entries with ``repr`` precision so loading is exact."""
    with Path(path).open("w") as fh:
        for x, y in zip(dataset.features, dataset.labels):
            items = [f"{j + 1}:{float(v)!r}" for j, v in enumerate(x) if v != 0.0]
            fh.write(" ".join([f"{float(y):+g}" if float(y).is_integer() else repr(float(y))] + items) + "\n")


def standardize(dataset: Dataset, target_L: float | None = None) -> Dataset:
    """Zero-mean, unit-variance columns; constant columns become zeros.

    With ``target_L`` the matrix is then scaled globally so that the largest
    eigenvalue of ``X^T X / m`` equals ``target_L``.
    """
    X = dataset.features
    m = X.shape[0]
    if m < 2:
        raise DataError("standardisation needs at least two rows")
    mean = X.mean(axis=0)
    centred = X - mean
    std = centred.std(axis=0)
    # rounding leaves a tiny spread in constant columns
    varying = std > 1e-12 * (1.0 + np.abs(mean))
    Z = np.where(varying, centred / np.where(varying, std, 1.0), 0.0)
    if target_L is not None:
        gram = Z.T @ Z / m
        if np.any(gram):
            top, _, _ = kernels.power_iteration(gram, np.random.default_rng(0).standard_normal(gram.shape[0]))
            Z = Z * math.sqrt(target_L / top)
    return dataclasses.replace(dataset, features=Z, standardized=True)


def add_intercept(dataset: Dataset) -> Dataset:
    """Append a column of ones."""
    X = np.hstack([dataset.features, np.ones((dataset.features.shape[0], 1))])
    return dataclasses.replace(dataset, features=X)


def to_binary_labels(dataset: Dataset) -> Dataset:
    """Map the two distinct label values to -1/+1 in sorted order."""
    classes = np.unique(dataset.labels)
    if classes.size > 2:
        raise DataError(f"binary labels requested but found {classes.size} classes")
    if classes.size == 2:
        labels = np.where(dataset.labels == classes[0], -1.0, 1.0)
    else:
        labels = np.where(dataset.labels > 0, 1.0, -1.0)
    return dataclasses.replace(dataset, labels=labels)
