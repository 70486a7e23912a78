from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import structlog

from app.engines.dataset import RowSet
from app.engines.grower import Tree, grow
from app.engines.interpretability import predictors_used
from app.exceptions import EmptyNode, TaskMismatch
from app.models import PenaltyKind, TaskKind
from app.schemas import GrowConfig, TuneConfig, TunePoint
from app.tasks.runner import run_jobs

logger = structlog.get_logger()


def in_sample_loss(tree: Tree, rows: RowSet) -> float:
    """Mean squared error (regression) or misclassification rate (classification) of `tree` on `rows`"""
    if rows.dataset.task != tree.task:
        raise TaskMismatch(f"{tree.task.value} tree evaluated on {rows.dataset.task.value} rows")
    if rows.size == 0:
        raise EmptyNode()

    predicted = tree.predict_many(rows.features())
    y = rows.targets()
    if tree.task == TaskKind.REGRESSION:
        residual = y - predicted
        return float(np.dot(residual, residual) / rows.size)
    return float(np.count_nonzero(predicted != y) / rows.size)


def r_squared_from_loss(mse: float, y: np.ndarray) -> float:
    variance = float(np.var(y))
    if variance > 0.0:
        return 1.0 - mse / variance
    return 1.0 if mse == 0.0 else 0.0


def r_squared(tree: Tree, rows: RowSet) -> float:
    """1 - MSE / Var(y) over `rows`"""
    if tree.task != TaskKind.REGRESSION:
        raise TaskMismatch("R² is only defined for regression trees")
    return r_squared_from_loss(in_sample_loss(tree, rows), rows.targets())


@dataclass
class TuneResult:
    k_star: float
    unpenalized_loss: float
    tuned_loss: float
    threshold: float
    tree: Tree
    unpenalized_tree: Tree
    trace: List[TunePoint] = field(default_factory=list)


def _grow_job(job: Tuple[RowSet, GrowConfig]) -> Tree:
    learning, config = job
    return grow(learning, config)


def _trace_point(tree: Tree, k: float, threshold: float) -> TunePoint:
    summary = tree.training
    return TunePoint(
        k=k,
        loss=summary.loss,
        r2=summary.r2,
        misclassification_rate=summary.misclassification_rate,
        eligible=summary.loss <= threshold,
        n_terminals=tree.n_terminals(),
        total_predictors=len(predictors_used(tree)),
    )


def tune(learning: RowSet, config: TuneConfig, n_jobs: int = 1) -> TuneResult:
    """
    Pick k* as the largest grid value whose tree keeps in-sample loss within (1 + c) of the
    unpenalized tree's loss, falling back to k* = 0.
    Every grid point is fitted; loss is not monotone in k.
    """
    started = time.perf_counter()
    base = config.base
    unpenalized = grow(learning, base.with_k(0.0))
    loss_0 = unpenalized.training.loss
    threshold = (1.0 + config.c) * loss_0

    trace = [_trace_point(unpenalized, 0.0, threshold)]
    k_star, tuned = 0.0, unpenalized

    # without a penalty every k grows the same tree
    if base.penalty != PenaltyKind.NONE:
        trees = run_jobs(_grow_job, [(learning, base.with_k(k)) for k in config.k_grid], n_jobs=n_jobs)
        for k, tree in zip(config.k_grid, trees):
            point = _trace_point(tree, k, threshold)
            trace.append(point)
            if point.eligible and k > k_star:
                k_star, tuned = k, tree

    logger.info(
        "Tuning finished",
        gain_kind=base.gain_kind.value,
        penalty=base.penalty.value,
        k_star=k_star,
        unpenalized_loss=loss_0,
        threshold=threshold,
        tuned_loss=tuned.training.loss,
        grid_points=len(config.k_grid),
        seconds=round(time.perf_counter() - started, 3),
    )
    return TuneResult(
        k_star=k_star,
        unpenalized_loss=loss_0,
        tuned_loss=tuned.training.loss,
        threshold=threshold,
        tree=tuned,
        unpenalized_tree=unpenalized,
        trace=trace,
    )
