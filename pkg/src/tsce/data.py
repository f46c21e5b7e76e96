"""Loading, validation and normalization of labeled univariate series.

Dataset files follow the common archive convention: one series per line,
class label first, values tab- or comma-separated (autodetected from the
first line).  Labels are remapped to a contiguous ``0..C-1`` alphabet in
ascending order of the raw label.  Accuracy tables are plain CSV with one
row per classifier and one column per dataset.

All structures returned here are frozen after construction (arrays are
marked read-only) and safe to share across threads.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, FormatError, LabelError, ParseError

__all__ = [
    "TimeSeries",
    "TimeSeriesDataset",
    "AccuracyTable",
    "load_ucr_dataset",
    "z_normalize",
    "save_accuracy_table",
    "load_accuracy_table",
    "upsert_accuracy_row",
]

#: series with population std below this are treated as constant
_DEGENERATE_STD = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeSeries:
    """A single labeled series: float64 values plus a class index."""

    values: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values)))
        if self.values.ndim != 1 or self.values.shape[0] < 2:
            raise DomainError(f"series must be 1-D with length >= 2, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("series contains non-finite values")
        if self.label < 0:
            raise DomainError(f"label must be non-negative, got {self.label}")

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class TimeSeriesDataset:
    """A named train/test split of equal-length series over C classes."""

    name: str
    train: tuple[TimeSeries, ...]
    test: tuple[TimeSeries, ...]
    n_classes: int
    series_length: int

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        if not self.train or not self.test:
            raise DomainError("both splits must be non-empty")
        if self.n_classes < 1:
            raise DomainError(f"n_classes must be positive, got {self.n_classes}")
        for split_name, split in (("train", self.train), ("test", self.test)):
            for s in split:
                if len(s) != self.series_length:
                    raise DomainError(
                        f"{split_name} series of length {len(s)} != declared {self.series_length}"
                    )
                if s.label >= self.n_classes:
                    raise DomainError(f"label {s.label} out of range for C={self.n_classes}")
        present = {s.label for s in self.train}
        if present != set(range(self.n_classes)):
            raise DomainError(f"train split must contain every class 0..{self.n_classes - 1}")

    def split(self, which: str) -> tuple[TimeSeries, ...]:
        if which not in ("train", "test"):
            raise DomainError(f"unknown split {which!r}")
        return self.train if which == "train" else self.test


def z_normalize(series: TimeSeries) -> TimeSeries:
    """Standardize one series to zero mean and unit population std.

    Series whose std is below 1e-8 are mapped to the zero vector, so
    constant inputs do not blow up.  The operation is idempotent.
    """
    v = series.values
    std = float(v.std())
    if std < _DEGENERATE_STD:
        return TimeSeries(np.zeros_like(v), series.label)
    return TimeSeries((v - v.mean()) / std, series.label)


def _detect_delimiter(first_line: str) -> str:
    if "\t" in first_line:
        return "\t"
    if "," in first_line:
        return ","
    raise FormatError("could not detect delimiter (expected tab- or comma-separated values)")


def _parse_series_file(path: str | Path) -> tuple[list[float], np.ndarray]:
    """Read one archive-format file into raw labels and a value matrix."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: file is empty")
    delim = _detect_delimiter(lines[0])

    labels: list[float] = []
    rows: list[list[float]] = []
    width = None
    for i, line in enumerate(lines, start=1):
        fields = line.split(delim)
        if width is None:
            width = len(fields)
            if width < 3:
                raise FormatError(f"{path}:{i}: need a label plus at least 2 values per row")
        elif len(fields) != width:
            raise FormatError(
                f"{path}:{i}: ragged row ({len(fields)} fields, expected {width})"
            )
        try:
            numeric = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"{path}:{i}: non-numeric cell ({exc})") from None
        labels.append(numeric[0])
        rows.append(numeric[1:])
    return labels, np.asarray(rows, dtype=np.float64)


def load_ucr_dataset(
    train_path: str | Path,
    test_path: str | Path,
    name: str | None = None,
    z_norm: bool = True,
) -> TimeSeriesDataset:
    """Load a ``<Name>_TRAIN`` / ``<Name>_TEST`` file pair.

    Raw labels (any ascending set of numbers, e.g. ``{-1, 1}``) are
    remapped to ``0..C-1`` preserving ascending order; the label alphabet
    is fixed by the train split and an unseen test label raises
    :class:`LabelError`.  Per-series z-normalization is applied unless
    ``z_norm=False``.
    """
    train_labels_raw, train_values = _parse_series_file(train_path)
    test_labels_raw, test_values = _parse_series_file(test_path)
    if train_values.shape[1] != test_values.shape[1]:
        raise FormatError(
            f"train length {train_values.shape[1]} != test length {test_values.shape[1]}"
        )

    alphabet = sorted(set(train_labels_raw))
    remap = {raw: idx for idx, raw in enumerate(alphabet)}
    for raw in test_labels_raw:
        if raw not in remap:
            raise LabelError(f"test label {raw!r} never appears in the train split")

    def build(labels_raw, values) -> tuple[TimeSeries, ...]:
        out = []
        for raw, row in zip(labels_raw, values):
            s = TimeSeries(row, remap[raw])
            out.append(z_normalize(s) if z_norm else s)
        return tuple(out)

    if name is None:
        stem = Path(train_path).name
        for suffix in (".tsv", ".csv", ".txt"):
            if stem.endswith(suffix):
                stem = stem[: -len(suffix)]
        name = stem[: -len("_TRAIN")] if stem.endswith("_TRAIN") else stem

    return TimeSeriesDataset(
        name=name,
        train=build(train_labels_raw, train_values),
        test=build(test_labels_raw, test_values),
        n_classes=len(alphabet),
        series_length=train_values.shape[1],
    )


@dataclass(frozen=True)
class AccuracyTable:
    """Rectangular classifier x dataset accuracy matrix, no missing cells."""

    classifiers: tuple[str, ...]
    datasets: tuple[str, ...]
    cells: np.ndarray  # shape (n_classifiers, n_datasets)

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "cells", _frozen(np.asarray(self.cells)))
        if len(set(self.classifiers)) != len(self.classifiers):
            raise FormatError("duplicate classifier names")
        if len(set(self.datasets)) != len(self.datasets):
            raise FormatError("duplicate dataset names")
        if self.cells.shape != (len(self.classifiers), len(self.datasets)):
            raise FormatError(
                f"cells shape {self.cells.shape} != "
                f"({len(self.classifiers)}, {len(self.datasets)})"
            )
        if not np.all(np.isfinite(self.cells)):
            raise FormatError("accuracy cells must be finite")
        if np.any(self.cells < 0.0) or np.any(self.cells > 1.0):
            raise FormatError("accuracies must lie in [0, 1]")

    def row(self, classifier: str) -> dict[str, float]:
        """Accuracies of one classifier as a dataset -> value mapping."""
        try:
            i = self.classifiers.index(classifier)
        except ValueError:
            raise FormatError(f"unknown classifier {classifier!r}") from None
        return {d: float(v) for d, v in zip(self.datasets, self.cells[i])}

    def with_row(self, classifier: str, accuracies: Mapping[str, float]) -> "AccuracyTable":
        """Return a copy with one row added or replaced (matched by name)."""
        missing = [d for d in self.datasets if d not in accuracies]
        if missing:
            raise FormatError(f"row {classifier!r} is missing datasets: {missing}")
        row = np.array([accuracies[d] for d in self.datasets], dtype=np.float64)
        if classifier in self.classifiers:
            i = self.classifiers.index(classifier)
            cells = self.cells.copy()
            cells[i] = row
            return AccuracyTable(self.classifiers, self.datasets, cells)
        return AccuracyTable(
            self.classifiers + (classifier,),
            self.datasets,
            np.vstack([self.cells, row[None, :]]),
        )


def save_accuracy_table(table: AccuracyTable, path: str | Path) -> None:
    """Write a table as CSV (header ``classifier_name,<datasets...>``).

    Cells are written with ``repr`` so the decimal text round-trips to the
    identical float.  The write is atomic (temp file + rename), UTF-8 with
    LF line endings.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["classifier_name", *table.datasets])
            for name, row in zip(table.classifiers, table.cells):
                writer.writerow([name, *(repr(float(v)) for v in row)])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_accuracy_table(path: str | Path) -> AccuracyTable:
    """Parse an accuracy-table CSV; missing cells raise :class:`FormatError`."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "classifier_name":
        raise FormatError(f"{path}:1: header must be 'classifier_name,<dataset>,...'")
    datasets = header[1:]
    if len(rows) < 2:
        raise FormatError(f"{path}: header-only file, no classifier rows")
    classifiers: list[str] = []
    cells = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(
                f"{path}:{lineno}: expected {len(header) - 1} cells, got {len(row) - 1}"
            )
        classifiers.append(row[0])
        try:
            cells.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric accuracy ({exc})") from None
    return AccuracyTable(tuple(classifiers), tuple(datasets), np.asarray(cells))


def upsert_accuracy_row(
    path: str | Path,
    classifier: str,
    accuracies: Mapping[str, float],
) -> AccuracyTable:
    """Atomically add or replace one classifier row in a CSV table.

    Creates the file if absent (dataset columns taken from ``accuracies``
    in sorted order).  Replacing an existing row keeps re-runs idempotent.
    """
    path = Path(path)
    if path.exists():
        table = load_accuracy_table(path)
    else:
        table = AccuracyTable((), tuple(sorted(accuracies)), np.zeros((0, len(accuracies))))
    table = table.with_row(classifier, accuracies)
    save_accuracy_table(table, path)
    return table
