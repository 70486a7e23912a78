from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.engines.dataset import Dataset, bootstrap_sample
from app.engines.grower import grow
from app.engines.tuning import in_sample_loss, r_squared_from_loss, tune
from app.exceptions import EmptyHoldout
from app.models import PenaltyKind, TaskKind
from app.schemas import CompareRow, OobConfig, OobReport
from app.tasks.runner import run_jobs

logger = structlog.get_logger()


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    holdout_size: int
    loss: Optional[float]
    k_star: Optional[float]

    @property
    def dropped(self) -> bool:
        return self.loss is None


def run_replicate(dataset: Dataset, config: OobConfig, replicate: int) -> ReplicateResult:
    """Fit on the bootstrap resample of `replicate` and score the tree on the rows it never drew"""
    in_bag, holdout = bootstrap_sample(dataset, config.base_seed, replicate)
    if holdout.size == 0:
        logger.warning("Empty holdout dropped", replicate=replicate)
        return ReplicateResult(replicate, 0, None, None)

    if config.tune is not None and config.penalty != PenaltyKind.NONE:
        result = tune(in_bag, config.tune)
        tree, k_star = result.tree, result.k_star
    else:
        tree = grow(in_bag, config.grow)
        k_star = config.grow.k if config.penalty != PenaltyKind.NONE else 0.0

    loss = in_sample_loss(tree, holdout)
    logger.debug("Replicate finished", replicate=replicate, holdout=holdout.size, loss=loss, k_star=k_star)
    return ReplicateResult(replicate, holdout.size, loss, k_star)


def _replicate_job(job: Tuple[Dataset, OobConfig, int]) -> ReplicateResult:
    return run_replicate(*job)


def oob_estimate(dataset: Dataset, config: OobConfig) -> OobReport:
    """
    Out-of-bag risk: for b = 1..B fit on the resample drawn with seed (base_seed, b) and average
    the per-row loss over its holdout; R_OOB is the mean over replicates with a nonempty holdout.
    """
    started = time.perf_counter()
    jobs = [(dataset, config, b) for b in range(1, config.replicates + 1)]
    results = run_jobs(_replicate_job, jobs, n_jobs=config.n_jobs)

    kept = [r for r in results if not r.dropped]
    dropped = [r.replicate for r in results if r.dropped]
    if not kept:
        raise EmptyHoldout(dropped[0])

    losses = [r.loss for r in kept]
    k_stars = [r.k_star for r in kept]
    r_oob = float(np.mean(losses))

    report = OobReport(
        task=dataset.task,
        gain_kind=config.grow.gain_kind,
        penalty=config.penalty,
        n_rows=dataset.n_rows,
        replicate_ids=[r.replicate for r in kept],
        losses=losses,
        holdout_sizes=[r.holdout_size for r in kept],
        k_stars=k_stars,
        r_oob=r_oob,
        mean_k_star=float(np.mean(k_stars)),
        oob_r2=r_squared_from_loss(r_oob, dataset.target) if dataset.task == TaskKind.REGRESSION else None,
        oob_misclassification=r_oob if dataset.task == TaskKind.CLASSIFICATION else None,
        mean_holdout_frac=float(np.mean([r.holdout_size for r in results])) / dataset.n_rows,
        dropped_replicates=dropped,
    )
    logger.info(
        "OOB estimate finished",
        gain_kind=config.grow.gain_kind.value,
        penalty=config.penalty.value,
        replicates=config.replicates,
        dropped=len(dropped),
        r_oob=r_oob,
        mean_k_star=report.mean_k_star,
        seconds=round(time.perf_counter() - started, 3),
    )
    return report


def loss_increase_pct(loss: float, baseline: float) -> float:
    if baseline > 0.0:
        return 100.0 * (loss - baseline) / baseline
    return 0.0 if loss == baseline else math.inf


def compare_penalties(
    dataset: Dataset,
    config: OobConfig,
    penalties: Sequence[PenaltyKind],
    dataset_name: str = "",
    classes_of_interest: Optional[Sequence[int]] = None,
) -> List[CompareRow]:
    """
    One report row per penalty, paired with the unpenalized run on the same replicate seeds.
    With classes of interest, the whole comparison repeats once per class.
    """
    if classes_of_interest:
        groups = [(config.with_grow(class_of_interest=int(k)), int(k)) for k in classes_of_interest]
    else:
        groups = [(config, config.grow.class_of_interest)]

    rows: List[CompareRow] = []
    for group_config, class_index in groups:
        label = None
        if class_index is not None and config.grow.gain_kind.needs_class_of_interest:
            label = dataset.class_labels[class_index]

        baseline = oob_estimate(dataset, group_config.with_penalty(PenaltyKind.NONE))
        for penalty_kind in penalties:
            if penalty_kind == PenaltyKind.NONE:
                report = baseline
            else:
                report = oob_estimate(dataset, group_config.with_penalty(penalty_kind))
            rows.append(
                CompareRow(
                    dataset=dataset_name,
                    criterion=config.grow.gain_kind.label,
                    penalty=penalty_kind.value,
                    oob_loss=report.r_oob,
                    loss_increase_pct=loss_increase_pct(report.r_oob, baseline.r_oob),
                    avg_k_star=report.mean_k_star,
                    mean_holdout_frac=report.mean_holdout_frac,
                    class_of_interest=label,
                )
            )
    return rows
