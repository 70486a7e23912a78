from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.engines.dataset import RowSet
from app.exceptions import EmptyNode, KindMismatch
from app.models import ImpurityKind, TaskKind

_REGRESSION_KINDS = frozenset({ImpurityKind.VARIANCE, ImpurityKind.HIGH_MEANS, ImpurityKind.LOW_MEANS})


@dataclass(frozen=True)
class NodeStats:
    """
    Sufficient statistics of a node.
    Regression nodes keep count, sum, sum of squares, min and max of y;
    classification nodes keep count and per-class counts.
    """
    task: TaskKind
    n: int
    total: float = 0.0
    total_sq: float = 0.0
    y_min: float = 0.0
    y_max: float = 0.0
    class_counts: Tuple[int, ...] = ()

    @classmethod
    def regression(cls, values: Sequence[float]) -> "NodeStats":
        y = np.asarray(values, dtype=np.float64)
        if y.size == 0:
            raise EmptyNode()
        return cls(
            task=TaskKind.REGRESSION,
            n=int(y.size),
            total=float(y.sum()),
            total_sq=float(np.dot(y, y)),
            y_min=float(y.min()),
            y_max=float(y.max()),
        )

    @classmethod
    def classification(cls, counts: Sequence[int]) -> "NodeStats":
        counts = tuple(int(c) for c in counts)
        n = sum(counts)
        if n == 0:
            raise EmptyNode()
        if any(c < 0 for c in counts):
            raise ValueError("class counts must be non-negative")
        return cls(task=TaskKind.CLASSIFICATION, n=n, class_counts=counts)

    @property
    def mean(self) -> float:
        self._require(TaskKind.REGRESSION)
        return self.total / self.n

    @property
    def proportions(self) -> np.ndarray:
        self._require(TaskKind.CLASSIFICATION)
        return np.asarray(self.class_counts, dtype=np.float64) / self.n

    @property
    def is_constant(self) -> bool:
        if self.task == TaskKind.REGRESSION:
            return self.y_min == self.y_max
        return max(self.class_counts) == self.n

    def _require(self, task: TaskKind) -> None:
        if self.task != task:
            raise KindMismatch(f"{task.value} statistics required, got {self.task.value}")


def node_stats(rows: RowSet) -> NodeStats:
    """Exact statistics over the rows, duplicates counted with multiplicity"""
    if rows.size == 0:
        raise EmptyNode()
    y = rows.targets()
    if rows.dataset.task == TaskKind.REGRESSION:
        return NodeStats.regression(y)
    counts = np.bincount(y, minlength=rows.dataset.n_classes)
    return NodeStats.classification(counts)


def impurity(stats: NodeStats, kind: ImpurityKind, class_of_interest: Optional[int] = None) -> float:
    """
    Node impurity; lower is more desirable.
    The one-sided extremes kinds are signed so that minimizing impurity isolates the
    high-mean (resp. low-mean, high class-of-interest) child.
    """
    expected = TaskKind.REGRESSION if kind in _REGRESSION_KINDS else TaskKind.CLASSIFICATION
    if stats.task != expected:
        raise KindMismatch(f"{kind.value} impurity needs {expected.value} statistics")

    if kind == ImpurityKind.VARIANCE:
        if stats.is_constant:
            return 0.0
        return float(variance_from_sums(stats.n, stats.total, stats.total_sq))
    if kind == ImpurityKind.HIGH_MEANS:
        return -stats.mean
    if kind == ImpurityKind.LOW_MEANS:
        return stats.mean

    counts = np.asarray(stats.class_counts, dtype=np.float64)
    if kind == ImpurityKind.GINI:
        return float(gini_from_counts(counts))
    if kind == ImpurityKind.CROSS_ENTROPY:
        return float(entropy_from_counts(counts))

    k_prime = _check_class_of_interest(class_of_interest, len(stats.class_counts))
    return -stats.class_counts[k_prime] / stats.n


def misclassification_rate(stats: NodeStats) -> float:
    if stats.task != TaskKind.CLASSIFICATION:
        raise KindMismatch("misclassification rate needs classification statistics")
    return 1.0 - max(stats.class_counts) / stats.n


def _check_class_of_interest(class_of_interest: Optional[int], n_classes: int) -> int:
    if class_of_interest is None or not 0 <= class_of_interest < n_classes:
        raise KindMismatch(f"class of interest {class_of_interest} is not a valid class index")
    return class_of_interest


# Vectorized forms used by the split scan. Arrays broadcast over candidate positions;
# class counts carry the classes on the last axis.

def variance_from_sums(n, total, total_sq):
    n = np.asarray(n, dtype=np.float64)
    mean = np.asarray(total, dtype=np.float64) / n
    return np.maximum(np.asarray(total_sq, dtype=np.float64) / n - mean * mean, 0.0)


def gini_from_counts(counts):
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / n
    return np.sum(p * (1.0 - p), axis=-1)


def entropy_from_counts(counts):
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -np.sum(terms, axis=-1) + 0.0
