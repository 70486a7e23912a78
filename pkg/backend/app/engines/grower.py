from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from app.engines.dataset import RowSet
from app.engines.gain import SplitEvaluation, combine_children, scaling_denominator
from app.engines.impurity import (
    NodeStats,
    entropy_from_counts,
    gini_from_counts,
    impurity,
    node_stats,
    variance_from_sums,
)
from app.engines.penalty import BranchPath, extend_branch, penalized_objective, penalty
from app.exceptions import DimensionMismatch, KindMismatch, TaskMismatch, ZeroDenominator
from app.models import ImpurityKind, TaskKind
from app.schemas import GrowConfig, TrainingSummary

logger = structlog.get_logger()

# Scores closer than this to the node maximum are ties; the lowest (variable, threshold) wins.
TIE_TOLERANCE = 1e-10

Fitted = Union[float, int]


@dataclass(frozen=True)
class SplitRule:
    """A row goes left iff x[variable] <= threshold"""
    variable: int
    threshold: float

    def goes_left(self, x: Sequence[float]) -> bool:
        return x[self.variable] <= self.threshold


@dataclass(frozen=True)
class TreeNode:
    n: int
    depth: int
    branch: BranchPath
    impurity: float
    fitted: Optional[Fitted] = None
    rule: Optional[SplitRule] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_terminal(self) -> bool:
        return self.rule is None


@dataclass(frozen=True, eq=False)
class Tree:
    root: TreeNode
    config: GrowConfig
    feature_names: Tuple[str, ...]
    task: TaskKind
    n_rows: int
    class_labels: Tuple[str, ...] = ()
    training: Optional[TrainingSummary] = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def nodes(self) -> Iterator[TreeNode]:
        """Depth-first, left before right"""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_terminal:
                stack.append(node.right)
                stack.append(node.left)

    def terminals(self) -> Iterator[TreeNode]:
        return (node for node in self.nodes() if node.is_terminal)

    def n_terminals(self) -> int:
        return sum(1 for _ in self.terminals())

    def max_depth(self) -> int:
        return max(node.depth for node in self.nodes())

    def terminal_for(self, x: Sequence[float]) -> TreeNode:
        if len(x) != self.n_features:
            raise DimensionMismatch(self.n_features, len(x))
        node = self.root
        while not node.is_terminal:
            node = node.left if node.rule.goes_left(x) else node.right
        return node

    def predict(self, x: Sequence[float]) -> Fitted:
        return self.terminal_for(x).fitted

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            got = features.shape[-1] if features.ndim else 0
            raise DimensionMismatch(self.n_features, got)
        dtype = np.int64 if self.task == TaskKind.CLASSIFICATION else np.float64
        return np.fromiter((self.predict(row) for row in features), dtype=dtype, count=features.shape[0])

    def structure(self) -> tuple:
        """Nested (variable, threshold, left, right) / (fitted, n) tuples for structural comparison"""
        def walk(node: TreeNode) -> tuple:
            if node.is_terminal:
                return (node.fitted, node.n)
            return (node.rule.variable, node.rule.threshold, walk(node.left), walk(node.right))
        return walk(self.root)


def predict(tree: Tree, x: Sequence[float]) -> Fitted:
    return tree.predict(x)


def modal_class(stats: NodeStats) -> int:
    """Most frequent class; ties go to the lowest class index"""
    if stats.task != TaskKind.CLASSIFICATION:
        raise KindMismatch("modal class needs classification statistics")
    return int(np.argmax(stats.class_counts))


def fitted_value(stats: NodeStats) -> Fitted:
    if stats.task == TaskKind.REGRESSION:
        return float(stats.mean)
    return modal_class(stats)


def min_child_size(min_node_fraction: float, n_learning: int) -> int:
    # guard against 0.07 * 100 == 7.000000000000001
    return max(1, math.ceil(min_node_fraction * n_learning - 1e-9))


def midpoint(low: float, high: float) -> float:
    mid = 0.5 * low + 0.5 * high
    # adjacent floats: keep the routing of `high` to the right
    return low if mid >= high else mid


def candidate_splits(rows: RowSet, variable: int) -> List[float]:
    values = np.unique(rows.column(variable))
    return [midpoint(a, b) for a, b in zip(values[:-1], values[1:])]


@dataclass
class _ScanResult:
    variable: int
    sorted_values: np.ndarray
    n_left: np.ndarray
    raw: np.ndarray
    scaled: np.ndarray
    scores: np.ndarray


class SplitScanner:
    """
    Scores every admissible (variable, threshold) of one node with a single sorted
    pass per feature over cumulative sums or class counts.
    """

    def __init__(self, rows: RowSet, config: GrowConfig, min_child: int):
        self.rows = rows
        self.config = config
        self.kind = config.gain_kind
        self.min_child = min_child
        self.parent = node_stats(rows)
        self.denominator = scaling_denominator(self.parent, self.kind, config.class_of_interest)

        y = rows.targets()
        if rows.dataset.task == TaskKind.REGRESSION:
            # centering keeps the sums-of-squares variance well conditioned
            centered = y - self.parent.mean
            self.prepared = np.column_stack([centered, centered * centered])
        else:
            self.prepared = np.zeros((y.size, rows.dataset.n_classes), dtype=np.float64)
            self.prepared[np.arange(y.size), y] = 1.0

        self.phi_parent, self.scale = self._parent_terms()

    def _parent_terms(self) -> Tuple[float, float]:
        total = self.prepared.sum(axis=0)
        n = self.parent.n
        impurity_kind = self.kind.impurity

        if impurity_kind == ImpurityKind.VARIANCE:
            phi = float(variance_from_sums(n, total[0], total[1]))
            return phi, phi
        if impurity_kind in (ImpurityKind.HIGH_MEANS, ImpurityKind.LOW_MEANS):
            mean_c = total[0] / n
            column = self.prepared[:, 0]
            if impurity_kind == ImpurityKind.HIGH_MEANS:
                return -mean_c, float(column.max() - mean_c)
            return mean_c, float(mean_c - column.min())
        return impurity(self.parent, impurity_kind, self.config.class_of_interest), self.denominator

    def _child_impurities(self, left: np.ndarray, right: np.ndarray, n_left: np.ndarray, n_right: np.ndarray):
        impurity_kind = self.kind.impurity
        if impurity_kind == ImpurityKind.VARIANCE:
            return (
                variance_from_sums(n_left, left[:, 0], left[:, 1]),
                variance_from_sums(n_right, right[:, 0], right[:, 1]),
            )
        if impurity_kind == ImpurityKind.HIGH_MEANS:
            return -left[:, 0] / n_left, -right[:, 0] / n_right
        if impurity_kind == ImpurityKind.LOW_MEANS:
            return left[:, 0] / n_left, right[:, 0] / n_right
        if impurity_kind == ImpurityKind.GINI:
            return gini_from_counts(left), gini_from_counts(right)
        if impurity_kind == ImpurityKind.CROSS_ENTROPY:
            return entropy_from_counts(left), entropy_from_counts(right)
        k_prime = self.config.class_of_interest
        return -left[:, k_prime] / n_left, -right[:, k_prime] / n_right

    def scan(self, variable: int, branch: BranchPath) -> Optional[_ScanResult]:
        x = self.rows.column(variable)
        n = x.size
        order = np.argsort(x, kind="stable")
        xs = x[order]

        n_left = np.arange(self.min_child, n - self.min_child + 1)
        if n_left.size == 0:
            return None
        n_left = n_left[xs[n_left - 1] < xs[n_left]]
        if n_left.size == 0:
            return None

        cumulative = np.cumsum(self.prepared[order], axis=0)
        total = cumulative[-1]
        left = cumulative[n_left - 1]
        right = total - left
        n_right = n - n_left

        phi_left, phi_right = self._child_impurities(left, right, n_left, n_right)
        raw = combine_children(self.kind, self.phi_parent, n_left, n_right, phi_left, phi_right)
        if not self.scale > 0.0:
            return None
        scaled = np.maximum(raw / self.scale, 0.0)
        gamma = penalty(self.config.penalty, self.config.k, branch, variable)

        return _ScanResult(variable, xs, n_left, raw, scaled, penalized_objective(scaled, gamma))


def best_split(
    rows: RowSet,
    branch: BranchPath,
    config: GrowConfig,
    n_learning: Optional[int] = None,
) -> Optional[Tuple[SplitRule, SplitEvaluation]]:
    """
    Best admissible split of the node by penalized scaled gain, or None when the node
    should be terminal (no candidate beats the no-split score of 0, or the parent is pure).
    Both children must hold at least ceil(min_node_fraction * n_learning) rows.
    """
    n_learning = rows.size if n_learning is None else n_learning
    min_child = min_child_size(config.min_node_fraction, n_learning)
    if rows.size < 2 * min_child:
        return None

    try:
        scanner = SplitScanner(rows, config, min_child)
    except ZeroDenominator:
        return None

    results = [
        result
        for result in (scanner.scan(variable, branch) for variable in range(rows.dataset.n_features))
        if result is not None and result.scores.size
    ]
    if not results:
        return None

    best = max(float(result.scores.max()) for result in results)
    if best <= TIE_TOLERANCE:
        return None

    cutoff = best - TIE_TOLERANCE
    for result in results:
        hits = np.flatnonzero(result.scores >= cutoff)
        if hits.size:
            i = int(hits[0])
            split_at = int(result.n_left[i])
            threshold = midpoint(result.sorted_values[split_at - 1], result.sorted_values[split_at])
            rule = SplitRule(result.variable, float(threshold))
            goes_left = rows.column(rule.variable) <= rule.threshold
            evaluation = SplitEvaluation(
                raw_gain=float(result.raw[i]),
                scaled_gain=float(result.scaled[i]),
                left_stats=node_stats(rows.select(goes_left)),
                right_stats=node_stats(rows.select(~goes_left)),
            )
            return rule, evaluation
    return None


def grow(learning: RowSet, config: GrowConfig) -> Tree:
    """Depth-first recursive partitioning maximizing scaled gain minus the branch penalty"""
    dataset = learning.dataset
    if config.gain_kind.task != dataset.task:
        raise TaskMismatch(f"{config.gain_kind.value} cannot be grown on a {dataset.task.value} target")
    if config.class_of_interest is not None and dataset.task == TaskKind.CLASSIFICATION:
        if config.class_of_interest >= dataset.n_classes:
            raise KindMismatch(f"class of interest {config.class_of_interest} is not a valid class index")

    started = time.perf_counter()
    n_learning = learning.size
    impurity_kind = config.gain_kind.impurity
    residual_loss = []

    def build(rows: RowSet, branch: BranchPath, depth: int) -> TreeNode:
        stats = node_stats(rows)
        node_impurity = float(impurity(stats, impurity_kind, config.class_of_interest))
        found = best_split(rows, branch, config, n_learning)
        if found is None:
            residual_loss.append(_terminal_loss(rows, stats))
            return TreeNode(
                n=stats.n,
                depth=depth,
                branch=branch,
                impurity=node_impurity,
                fitted=fitted_value(stats),
            )

        rule, _ = found
        goes_left = rows.column(rule.variable) <= rule.threshold
        child_branch = extend_branch(branch, rule.variable)
        return TreeNode(
            n=stats.n,
            depth=depth,
            branch=branch,
            impurity=node_impurity,
            rule=rule,
            left=build(rows.select(goes_left), child_branch, depth + 1),
            right=build(rows.select(~goes_left), child_branch, depth + 1),
        )

    root = build(learning, (), 0)
    tree = Tree(
        root=root,
        config=config,
        feature_names=dataset.feature_names,
        task=dataset.task,
        n_rows=n_learning,
        class_labels=dataset.class_labels,
        training=training_summary(learning, float(np.sum(residual_loss)) / n_learning),
    )
    logger.debug(
        "Tree grown",
        gain_kind=config.gain_kind.value,
        penalty=config.penalty.value,
        k=config.k,
        rows=n_learning,
        terminals=tree.n_terminals(),
        depth=tree.max_depth(),
        seconds=round(time.perf_counter() - started, 4),
    )
    return tree


def _terminal_loss(rows: RowSet, stats: NodeStats) -> float:
    """Summed squared error (regression) or misclassification count of a terminal's training rows"""
    y = rows.targets()
    if stats.task == TaskKind.REGRESSION:
        residual = y - stats.mean
        return float(np.dot(residual, residual))
    return float(stats.n - max(stats.class_counts))


def training_summary(rows: RowSet, loss: float) -> TrainingSummary:
    if rows.dataset.task == TaskKind.REGRESSION:
        y = rows.targets()
        variance = float(np.var(y))
        r2 = 1.0 - loss / variance if variance > 0.0 else (1.0 if loss == 0.0 else 0.0)
        return TrainingSummary(n_rows=rows.size, loss=loss, r2=r2)
    return TrainingSummary(n_rows=rows.size, loss=loss, misclassification_rate=loss)
