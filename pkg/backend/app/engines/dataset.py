from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from app.exceptions import (
    EmptyDataset,
    FeatureMismatch,
    MalformedCsv,
    MissingColumn,
    ParseError,
    SingleClass,
    UnreadableFile,
)
from app.models import TaskKind

logger = structlog.get_logger()

# Regression targets are summed as squares; larger magnitudes overflow float64.
MAX_ABS_TARGET = 1e150


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable learning sample: N rows of numeric features plus a target"""
    feature_names: Tuple[str, ...]
    features: np.ndarray
    target: np.ndarray
    task: TaskKind
    class_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if features.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match the feature matrix width")
        if len(set(self.feature_names)) != len(self.feature_names) or any(not name for name in self.feature_names):
            raise ValueError("feature names must be unique and nonempty")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")

        if self.task == TaskKind.CLASSIFICATION:
            target = np.array(self.target, dtype=np.int64, copy=True)
            if len(self.class_labels) < 2:
                raise ValueError("classification needs at least two class labels")
            if target.size and (target.min() < 0 or target.max() >= len(self.class_labels)):
                raise ValueError("class index out of range")
        else:
            target = np.array(self.target, dtype=np.float64, copy=True)
            if not np.all(np.isfinite(target)):
                raise ValueError("regression target must be finite")

        if target.shape != (features.shape[0],):
            raise ValueError("target length does not match the number of rows")

        features.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def all_rows(self) -> "RowSet":
        return RowSet(self, np.arange(self.n_rows, dtype=np.int64))

    def rows(self, indices: Iterable[int]) -> "RowSet":
        return RowSet(self, np.fromiter(indices, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class RowSet:
    """Ordered row indices into a dataset; duplicates allowed for bootstrap resamples"""
    dataset: Dataset
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64, copy=True).reshape(-1)
        if indices.size and (indices.min() < 0 or indices.max() >= self.dataset.n_rows):
            raise IndexError("row index out of range")
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.size

    def targets(self) -> np.ndarray:
        return self.dataset.target[self.indices]

    def features(self) -> np.ndarray:
        return self.dataset.features[self.indices]

    def column(self, variable: int) -> np.ndarray:
        return self.dataset.features[self.indices, variable]

    def distinct(self) -> np.ndarray:
        return np.unique(self.indices)

    def select(self, mask: np.ndarray) -> "RowSet":
        return RowSet(self.dataset, self.indices[mask])

    def to_list(self) -> List[int]:
        return self.indices.tolist()


CsvSource = Union[str, io.StringIO]


def _read_csv(source: CsvSource, **kwargs) -> pd.DataFrame:
    try:
        return pd.read_csv(source, encoding="utf-8", **kwargs)
    except UnicodeDecodeError as e:
        raise MalformedCsv(f"not valid UTF-8 text (byte offset {e.start})")
    except OSError as e:
        raise UnreadableFile(str(source), e.strerror or str(e))


def read_table(source: CsvSource) -> Tuple[List[str], pd.DataFrame]:
    """Header names plus an all-string frame with positional columns"""
    try:
        header = _read_csv(source, nrows=1, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return [], pd.DataFrame(dtype=str)
    names = [str(name).strip() for name in header.iloc[0].tolist()]

    if hasattr(source, "seek"):
        source.seek(0)
    try:
        frame = _read_csv(
            source,
            header=None,
            skiprows=1,
            names=list(range(len(names))),
            index_col=False,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame(columns=list(range(len(names))), dtype=str)
    except pd.errors.ParserError as e:
        raise MalformedCsv(str(e).strip())
    return names, frame


def load_csv(
    path: CsvSource,
    target_column: str,
    task: Optional[TaskKind] = None,
    feature_columns: Optional[Sequence[str]] = None,
) -> Dataset:
    """
    Read a headed CSV into a Dataset.
    task=None detects the task: a fully numeric target is regression, anything else classification.
    Class indices follow the first appearance of each label in file order.
    """
    names, frame = read_table(path)
    source = path if isinstance(path, str) else "<text>"
    return dataset_from_frame(frame, names, target_column, task, feature_columns, source=source)


def load_csv_text(
    text: str,
    target_column: str,
    task: Optional[TaskKind] = None,
    feature_columns: Optional[Sequence[str]] = None,
) -> Dataset:
    return load_csv(io.StringIO(text), target_column, task, feature_columns)


def load_feature_matrix(path: CsvSource, feature_names: Sequence[str], ignore: Sequence[str] = ()) -> np.ndarray:
    """
    Feature matrix of new data for a fitted model, columns in model order.
    Columns listed in `ignore` (typically the target) may be present; any other extra or
    missing column is a FeatureMismatch.
    """
    names, frame = read_table(path)
    validate_feature_names(feature_names, [name for name in names if name not in set(ignore)])
    if len(frame) == 0:
        raise EmptyDataset(path if isinstance(path, str) else "")
    return _numeric_columns(frame.fillna(""), names, feature_names)


def _numeric_columns(frame: pd.DataFrame, names: List[str], columns: Sequence[str]) -> np.ndarray:
    """Parse the named columns as finite floats; the first bad cell in file order is a ParseError"""
    numeric = np.empty((len(frame), len(columns)), dtype=np.float64)
    cells = []
    for out_col, name in enumerate(columns):
        column = frame.iloc[:, names.index(name)].astype(str).str.strip()
        cells.append(column)
        numeric[:, out_col] = pd.to_numeric(column, errors="coerce").to_numpy(dtype=np.float64)

    bad = ~np.isfinite(numeric)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ParseError(int(row) + 1, columns[col], cells[col].iat[row])
    return numeric


def dataset_from_frame(
    frame: pd.DataFrame,
    names: List[str],
    target_column: str,
    task: Optional[TaskKind] = None,
    feature_columns: Optional[Sequence[str]] = None,
    source: str = "",
) -> Dataset:
    """Build a Dataset from an all-string frame whose columns are positional"""
    if target_column not in names:
        raise MissingColumn(target_column, names)
    for position, name in enumerate(names):
        if not name:
            raise FeatureMismatch(f"#{position + 1}", "has an empty header")
    if len(set(names)) != len(names):
        duplicate = next(name for name in names if names.count(name) > 1)
        raise FeatureMismatch(duplicate, "appears more than once in the header")

    if feature_columns is None:
        feature_columns = [name for name in names if name != target_column]
    else:
        for name in feature_columns:
            if name not in names:
                raise MissingColumn(name, names)
            if name == target_column:
                raise FeatureMismatch(name, "is the target column")

    if len(frame) == 0:
        raise EmptyDataset(source)

    frame = frame.fillna("")
    numeric = _numeric_columns(frame, names, feature_columns)

    target_raw = frame.iloc[:, names.index(target_column)].astype(str).str.strip()
    target_numeric = pd.to_numeric(target_raw, errors="coerce").to_numpy(dtype=np.float64)

    if task is None:
        task = TaskKind.REGRESSION if np.all(np.isfinite(target_numeric)) else TaskKind.CLASSIFICATION

    if task == TaskKind.REGRESSION:
        bad_target = ~np.isfinite(target_numeric)
        if bad_target.any():
            row = int(np.flatnonzero(bad_target)[0])
            raise ParseError(row + 1, target_column, target_raw.iat[row])
        too_large = np.abs(target_numeric) > MAX_ABS_TARGET
        if too_large.any():
            row = int(np.flatnonzero(too_large)[0])
            raise ParseError(
                row + 1, target_column, target_raw.iat[row], reason=f"beyond the supported magnitude {MAX_ABS_TARGET:g}"
            )
        dataset = Dataset(tuple(feature_columns), numeric, target_numeric, TaskKind.REGRESSION)
    else:
        empty = (target_raw == "").to_numpy()
        if empty.any():
            row = int(np.flatnonzero(empty)[0])
            raise ParseError(row + 1, target_column, "", reason="an empty class label")
        codes, labels = pd.factorize(target_raw, sort=False)
        if len(labels) < 2:
            raise SingleClass(str(labels[0]))
        dataset = Dataset(
            tuple(feature_columns),
            numeric,
            codes.astype(np.int64),
            TaskKind.CLASSIFICATION,
            tuple(str(label) for label in labels),
        )

    logger.info(
        "Dataset loaded",
        source=source,
        rows=dataset.n_rows,
        features=dataset.n_features,
        task=dataset.task.value,
        classes=dataset.n_classes,
    )
    return dataset


def bootstrap_sample(dataset: Dataset, seed: int, replicate: int = 0) -> Tuple[RowSet, RowSet]:
    """
    Draw N rows with replacement (in-bag) and return the rows never drawn (out-of-bag, ascending).
    The generator is numpy's PCG64 seeded from SeedSequence([seed, replicate]).
    """
    if dataset.n_rows < 1:
        raise EmptyDataset()
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate index must be non-negative")

    rng = np.random.default_rng(np.random.SeedSequence([seed, replicate]))
    in_bag = rng.integers(0, dataset.n_rows, size=dataset.n_rows, dtype=np.int64)
    out_of_bag = np.setdiff1d(np.arange(dataset.n_rows, dtype=np.int64), in_bag, assume_unique=False)
    return RowSet(dataset, in_bag), RowSet(dataset, out_of_bag)


def validate_feature_names(expected: Sequence[str], got: Sequence[str]) -> None:
    """Raise FeatureMismatch naming the first column that differs between a model and new data"""
    got_set = set(got)
    for name in expected:
        if name not in got_set:
            raise FeatureMismatch(name, "is required by the model but missing from the data")
    expected_set = set(expected)
    for name in got:
        if name not in expected_set:
            raise FeatureMismatch(name, "is not a feature of the model")
