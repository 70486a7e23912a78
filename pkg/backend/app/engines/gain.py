from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.engines.impurity import NodeStats, impurity
from app.exceptions import DegenerateChild, KindMismatch, ZeroDenominator
from app.models import GainKind, ImpurityKind


@dataclass(frozen=True)
class SplitEvaluation:
    raw_gain: float
    scaled_gain: float
    left_stats: NodeStats
    right_stats: NodeStats


def raw_gain(
    parent: NodeStats,
    left: NodeStats,
    right: NodeStats,
    kind: GainKind,
    class_of_interest: Optional[int] = None,
) -> float:
    """
    Goodness of split.
    CART kinds: phi(t) - n_L/n phi(t_L) - n_R/n phi(t_R).
    One-sided kinds: phi(t) - min(phi(t_L), phi(t_R)).
    """
    for stats in (parent, left, right):
        if stats.task != kind.task:
            raise KindMismatch(f"{kind.value} needs {kind.task.value} statistics")
    if left.n == 0 or right.n == 0:
        raise DegenerateChild(left.n, right.n)
    if left.n + right.n != parent.n:
        raise ValueError(f"children hold {left.n + right.n} rows, parent holds {parent.n}")

    phi = impurity(parent, kind.impurity, class_of_interest)
    phi_left = impurity(left, kind.impurity, class_of_interest)
    phi_right = impurity(right, kind.impurity, class_of_interest)
    return float(combine_children(kind, phi, left.n, right.n, phi_left, phi_right))


def combine_children(kind: GainKind, phi_parent, n_left, n_right, phi_left, phi_right):
    """Gain from parent and child impurities; broadcasts over arrays of candidate splits"""
    if kind.one_sided:
        return phi_parent - np.minimum(phi_left, phi_right)
    n = np.asarray(n_left, dtype=np.float64) + n_right
    return phi_parent - (n_left / n) * phi_left - (n_right / n) * phi_right


def scaling_denominator(parent: NodeStats, kind: GainKind, class_of_interest: Optional[int] = None) -> float:
    """
    Normalizer that maps the gain of any split of `parent` into [0, 1].
    Raises ZeroDenominator when the parent is already pure or constant for the criterion.
    """
    if parent.task != kind.task:
        raise KindMismatch(f"{kind.value} needs {kind.task.value} statistics")

    if kind in (GainKind.HIGH_MEANS, GainKind.LOW_MEANS):
        if parent.is_constant:
            raise ZeroDenominator(f"{kind.value}: constant node")
        mean = parent.mean
        denominator = parent.y_max - mean if kind == GainKind.HIGH_MEANS else mean - parent.y_min
    elif kind == GainKind.ONE_SIDED_EXTREME_CLASSIFICATION:
        denominator = 1.0 + impurity(parent, ImpurityKind.CLASS_EXTREME, class_of_interest)
    else:
        if parent.is_constant:
            raise ZeroDenominator(f"{kind.value}: pure node")
        denominator = impurity(parent, kind.impurity)

    if not denominator > 0.0:
        raise ZeroDenominator(f"{kind.value}: parent needs no further split")
    return float(denominator)


def scale_gain(
    parent: NodeStats,
    raw: float,
    kind: GainKind,
    class_of_interest: Optional[int] = None,
) -> float:
    scaled = raw / scaling_denominator(parent, kind, class_of_interest)
    # negative gain means "do not split"
    return max(scaled, 0.0)


def evaluate_split(
    parent: NodeStats,
    left: NodeStats,
    right: NodeStats,
    kind: GainKind,
    class_of_interest: Optional[int] = None,
) -> SplitEvaluation:
    raw = raw_gain(parent, left, right, kind, class_of_interest)
    return SplitEvaluation(
        raw_gain=raw,
        scaled_gain=scale_gain(parent, raw, kind, class_of_interest),
        left_stats=left,
        right_stats=right,
    )
