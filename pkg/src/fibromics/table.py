"""Per-instance feature tables and their CSV serialization.

Schema: patient_id, image_id, instance_label, instance_class, source
(manual|predicted), then one column per feature in canonical order. Floats
are written with repr, which round-trips exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ManifestError
from .manifest import TUMOR_CLASSES, TaskSpec

META_COLUMNS = ("patient_id", "image_id", "instance_label", "instance_class", "source")
SOURCES = ("manual", "predicted")


@dataclass(frozen=True)
class RowKey:
    patient_id: str
    image_id: str
    instance_label: int
    instance_class: str
    source: str

    def __post_init__(self) -> None:
        if self.instance_class not in TUMOR_CLASSES:
            raise ManifestError(f"unknown instance_class {self.instance_class!r}")
        if self.source not in SOURCES:
            raise ManifestError(f"source must be manual or predicted, got {self.source!r}")


@dataclass
class FeatureTable:
    keys: list[RowKey]
    feature_names: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape != (len(self.keys), len(self.feature_names)):
            raise ManifestError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.keys)} rows x {len(self.feature_names)} features"
            )
        if len(self.keys) and not np.isfinite(self.matrix).all():
            raise ManifestError("feature table holds non-finite values")

    def __len__(self) -> int:
        return len(self.keys)

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.feature_names.index(name)]

    def subset(self, indices) -> "FeatureTable":
        idx = list(indices)
        return FeatureTable(
            [self.keys[i] for i in idx], self.feature_names, self.matrix[idx]
        )


def write_feature_table(path: str, table: FeatureTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(META_COLUMNS) + list(table.feature_names))
        for key, row in zip(table.keys, table.matrix):
            writer.writerow(
                [
                    key.patient_id,
                    key.image_id,
                    key.instance_label,
                    key.instance_class,
                    key.source,
                ]
                + [repr(float(v)) for v in row]
            )


def read_feature_table(path: str) -> FeatureTable:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ManifestError(f"{path}: empty feature table") from None
            rows = list(reader)
    except OSError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if tuple(header[: len(META_COLUMNS)]) != META_COLUMNS:
        raise ManifestError(
            f"{path}: header must start with {','.join(META_COLUMNS)}"
        )
    names = tuple(header[len(META_COLUMNS) :])
    if not names:
        raise ManifestError(f"{path}: no feature columns")
    keys: list[RowKey] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ManifestError(f"{path}:{lineno}: expected {len(header)} fields")
        try:
            label = int(row[2])
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: bad instance_label {row[2]!r}") from None
        keys.append(RowKey(row[0], row[1], label, row[3].strip().upper(), row[4].strip()))
        try:
            vals = [float(v) for v in row[len(META_COLUMNS) :]]
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: non-numeric feature value") from None
        values.append(vals)
    matrix = np.array(values, dtype=np.float64) if values else np.zeros((0, len(names)))
    return FeatureTable(keys, names, matrix)


def task_arrays(table: FeatureTable, task: TaskSpec):
    """Rows participating in a task: (row indices, labels, patient ids)."""
    idx: list[int] = []
    labels: list[int] = []
    patients: list[str] = []
    for i, key in enumerate(table.keys):
        y = task.label_for(key.instance_class)
        if y is None:
            continue
        idx.append(i)
        labels.append(y)
        patients.append(key.patient_id)
    if not idx:
        raise ManifestError(f"task {task.name}: no usable rows in the feature table")
    return np.array(idx), np.array(labels, dtype=np.int64), patients
