"""Dataset loading, validation, and release writing.

Files are conventional tabular CSVs: one row per sample, first row a
header. Internally, all math in this package runs on the transposed
layout where samples are *columns* of an m x n matrix, so the covariance
and sensitivity formulas read exactly as derived. This module owns that
transpose; nothing outside it should ever flip orientation.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Problem with input data content (missing file, bad cell, ...)."""


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with optional labels.

    features has shape (m, n): m feature dimensions, n samples stored
    column-wise. labels (real-valued) and class_labels (categorical)
    are mutually exclusive, each of length n when present. label_bound
    declares the interval [-a, a] that real labels were clipped to.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    class_labels: np.ndarray | None = None
    label_bound: float | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got ndim={feats.ndim}")
        m, n = feats.shape
        if m < 1 or n < 1:
            raise DataError(f"need at least one feature and one sample, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            bad = np.argwhere(~np.isfinite(feats))[0]
            raise DataError(f"non-finite feature value at feature {bad[0]}, sample {bad[1]}")
        object.__setattr__(self, "features", feats)
        if self.labels is not None and self.class_labels is not None:
            raise DataError("a dataset cannot carry both real and categorical labels")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=float)
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got shape {labels.shape}")
            if not np.all(np.isfinite(labels)):
                raise DataError("labels contain non-finite values")
            if self.label_bound is not None and np.any(np.abs(labels) > self.label_bound):
                raise DataError(
                    f"labels exceed the declared bound {self.label_bound}; clip them first"
                )
            object.__setattr__(self, "labels", labels)
        if self.class_labels is not None:
            cls = np.asarray(self.class_labels)
            if cls.shape != (n,):
                raise DataError(f"class labels must have length {n}, got shape {cls.shape}")
            object.__setattr__(self, "class_labels", cls)
        if self.label_bound is not None and self.label_bound <= 0:
            raise DataError(f"label bound must be positive, got {self.label_bound}")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != m:
                raise DataError(f"expected {m} feature names, got {len(names)}")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]


def clip_labels(labels: np.ndarray, a: float) -> tuple[np.ndarray, int]:
    """Clamp labels to [-a, a]; returns the clipped vector and clip count."""
    if a <= 0:
        raise ValueError(f"label bound must be positive, got {a}")
    labels = np.asarray(labels, dtype=float)
    clipped = np.clip(labels, -a, a)
    n_clipped = int(np.count_nonzero(clipped != labels))
    return clipped, n_clipped


def load_csv(path: str, label_column: str | None = None,
             label_kind: str | None = None) -> Dataset:
    """Load a rows-as-samples CSV into a Dataset.

    If label_column is given, that column is split off as labels;
    label_kind selects "real" (parsed as floats) or "categorical"
    (kept as strings). Any non-numeric feature cell is an error that
    names the offending row and column. No row is ever silently
    dropped.
    """
    if label_column is not None and label_kind not in ("real", "categorical"):
        raise ValueError(f"label_kind must be 'real' or 'categorical', got {label_kind!r}")
    if label_kind is not None and label_column is None:
        raise ValueError("label_kind given without label_column")
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty, expected a header row") from None
        header = [h.strip() for h in header]
        rows = list(reader)

    # trailing blank lines are tolerated; an interior one hides a record
    # and is an error, never a silent drop
    while rows and not rows[-1]:
        rows.pop()
    for i, row in enumerate(rows):
        if not row:
            raise DataError(f"{path}: blank line at row {i + 2}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    label_idx = None
    if label_column is not None:
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(
                f"{path}: label column {label_column!r} not found in header {header}"
            ) from None

    feature_idx = [j for j in range(len(header)) if j != label_idx]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns left after removing the label")

    n = len(rows)
    values = np.empty((n, len(feature_idx)), dtype=float)
    raw_labels: list[str] = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}"
            )
        for k, j in enumerate(feature_idx):
            cell = row[j].strip()
            try:
                values[i, k] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {i + 2}, "
                    f"column {header[j]!r}"
                ) from None
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())

    labels = None
    class_labels = None
    if label_idx is not None:
        if label_kind == "real":
            try:
                labels = np.array([float(v) for v in raw_labels])
            except ValueError:
                bad = next(v for v in raw_labels if not _is_float(v))
                raise DataError(
                    f"{path}: non-numeric label value {bad!r} in column {label_column!r}"
                ) from None
        else:
            class_labels = np.array(raw_labels)

    return Dataset(
        features=values.T,  # rows-as-samples on disk -> columns-as-samples in memory
        labels=labels,
        class_labels=class_labels,
        feature_names=tuple(header[j] for j in feature_idx),
    )


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any IEEE double exactly.
    return format(float(x), ".17g")


REQUIRED_METADATA_KEYS = (
    "mode", "m", "p", "n", "n_synth", "epsilon_total", "epsilon_mu",
    "epsilon_sigma", "split_ratio", "label_bound", "seed",
    "psd_repair_applied", "clip_count", "timestamp",
)


def write_dataset_csv(dataset: Dataset, path: str) -> str:
    """Write a Dataset back to rows-as-samples CSV.

    Floats are serialized with 17 significant digits, enough to
    round-trip IEEE doubles exactly. Real labels go in a trailing
    "label" column, categorical ones in a "class" column.
    """
    m = dataset.n_features
    names = list(dataset.feature_names) if dataset.feature_names else [
        f"z{j + 1}" for j in range(m)
    ]
    header = list(names)
    if dataset.labels is not None:
        header.append("label")
    elif dataset.class_labels is not None:
        header.append("class")

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        cols = dataset.features
        for i in range(dataset.n_samples):
            row = [_fmt(v) for v in cols[:, i]]
            if dataset.labels is not None:
                row.append(_fmt(dataset.labels[i]))
            elif dataset.class_labels is not None:
                row.append(str(dataset.class_labels[i]))
            writer.writerow(row)
    return path


def write_release(synthetic: Dataset, metadata: dict, out_dir: str) -> tuple[str, str]:
    """Write a synthetic dataset plus its metadata sidecar.

    Produces out_dir/data.csv and out_dir/metadata.json; returns both
    paths. The metadata must carry the full accounting key set so every
    release is auditable on its own.
    """
    missing = [k for k in REQUIRED_METADATA_KEYS if k not in metadata]
    if missing:
        raise ValueError(f"metadata is missing required keys: {missing}")

    os.makedirs(out_dir, exist_ok=True)
    data_path = write_dataset_csv(synthetic, os.path.join(out_dir, "data.csv"))
    meta_path = os.path.join(out_dir, "metadata.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return data_path, meta_path


def write_matrix_csv(matrix: np.ndarray, path: str, prefix: str = "c") -> str:
    """Write a bare numeric matrix as CSV with a generated header."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{prefix}{j + 1}" for j in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([_fmt(v) for v in row])
    return path
