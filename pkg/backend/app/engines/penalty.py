from __future__ import annotations

from typing import Callable, Dict, Sequence, Tuple

from app.models import PenaltyKind

BranchPath = Tuple[int, ...]


def extend_branch(branch: BranchPath, variable: int) -> BranchPath:
    return tuple(branch) + (int(variable),)


def _no_penalty(k: float, branch: Sequence[int], split_variable: int) -> float:
    return 0.0


def _new_variable_penalty(k: float, branch: Sequence[int], split_variable: int) -> float:
    return k if split_variable not in branch else 0.0


def _ema_penalty(k: float, branch: Sequence[int], split_variable: int) -> float:
    # the parent's variable weighs k, each level further up decays by (1 - k)
    gamma = 0.0
    weight = k
    for variable in reversed(branch):
        if variable != split_variable:
            gamma += weight
        weight *= 1.0 - k
    return gamma


_PENALTIES: Dict[PenaltyKind, Callable[[float, Sequence[int], int], float]] = {
    PenaltyKind.NONE: _no_penalty,
    PenaltyKind.NEW_VARIABLE: _new_variable_penalty,
    PenaltyKind.EMA: _ema_penalty,
}


def penalty(kind: PenaltyKind, k: float, branch: Sequence[int], split_variable: int) -> float:
    """
    Interpretability charge for splitting on `split_variable` below `branch`
    (root-to-node split variables, repeats kept in order).
    """
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"penalty constant must lie in [0, 1], got {k}")
    if k == 0.0:
        return 0.0
    return _PENALTIES[PenaltyKind(kind)](k, branch, split_variable)


def penalized_objective(scaled_gain, gamma):
    """Score of a candidate split (scalar or array of gains); the no-split alternative scores 0"""
    return scaled_gain - gamma
