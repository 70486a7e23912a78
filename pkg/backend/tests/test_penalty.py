import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.engines.penalty import extend_branch, penalized_objective, penalty
from app.models import PenaltyKind
from tests import oracles

RM, LSTAT, CRIM = 5, 12, 0


def test_ema_reused_variable():
    assert penalty(PenaltyKind.EMA, 0.15, [RM, LSTAT, RM], RM) == pytest.approx(0.1275, abs=1e-12)


def test_ema_new_variable():
    assert penalty(PenaltyKind.EMA, 0.15, [RM, LSTAT, RM], CRIM) == pytest.approx(0.385875, abs=1e-12)


def test_ema_at_root_is_zero():
    assert penalty(PenaltyKind.EMA, 0.5, [], RM) == 0.0


def test_new_variable_indicator():
    assert penalty(PenaltyKind.NEW_VARIABLE, 0.27, [RM, LSTAT], LSTAT) == 0.0
    assert penalty(PenaltyKind.NEW_VARIABLE, 0.27, [RM, LSTAT], CRIM) == 0.27
    assert penalty(PenaltyKind.NEW_VARIABLE, 0.27, [], CRIM) == 0.27


@pytest.mark.parametrize("kind", list(PenaltyKind))
def test_zero_constant_means_no_penalty(kind):
    assert penalty(kind, 0.0, [RM, LSTAT, RM], CRIM) == 0.0


def test_none_is_always_zero():
    assert penalty(PenaltyKind.NONE, 0.9, [RM, LSTAT], CRIM) == 0.0


def test_constant_out_of_range():
    with pytest.raises(ValueError):
        penalty(PenaltyKind.EMA, 1.5, [RM], CRIM)


def test_parent_weighs_most():
    k = 0.3
    # differs only from the parent
    near = penalty(PenaltyKind.EMA, k, [LSTAT, LSTAT, RM], LSTAT)
    # differs only from the root
    far = penalty(PenaltyKind.EMA, k, [RM, LSTAT, LSTAT], LSTAT)
    assert near == pytest.approx(k)
    assert far == pytest.approx(k * (1 - k) ** 2)
    assert near > far


def test_ema_is_order_sensitive_new_variable_is_not():
    a, b = 1, 2
    assert penalty(PenaltyKind.EMA, 0.4, [a, b], a) != penalty(PenaltyKind.EMA, 0.4, [b, a], a)
    assert penalty(PenaltyKind.NEW_VARIABLE, 0.4, [a, b], 3) == penalty(PenaltyKind.NEW_VARIABLE, 0.4, [b, a], 3)


def test_penalized_objective():
    assert penalized_objective(0.350649, 0.0) == pytest.approx(0.350649)
    assert penalized_objective(0.350649, 0.27) == pytest.approx(0.080649)
    assert penalized_objective(0.05, 0.27) == pytest.approx(-0.22)


def test_penalized_objective_over_candidate_arrays():
    scores = penalized_objective(np.array([0.3, 0.1, 0.0]), 0.2)
    assert scores.tolist() == pytest.approx([0.1, -0.1, -0.2])


@pytest.mark.parametrize("kind", list(PenaltyKind))
def test_every_kind_dispatches(kind):
    assert penalty(kind, 0.3, [RM], LSTAT) == {
        PenaltyKind.NONE: 0.0,
        PenaltyKind.NEW_VARIABLE: 0.3,
        PenaltyKind.EMA: 0.3,
    }[kind]
    assert penalty(kind.value, 0.3, [RM], RM) == 0.0


def test_extend_branch_keeps_repeats():
    assert extend_branch(extend_branch((), RM), RM) == (RM, RM)


@given(
    branch=st.lists(st.integers(0, 4), max_size=12),
    variable=st.integers(0, 4),
    k=st.floats(0.0, 1.0),
)
@settings(max_examples=10_000, deadline=None)
def test_ema_bounds(branch, variable, k):
    gamma = penalty(PenaltyKind.EMA, k, branch, variable)
    assert 0.0 <= gamma <= 1.0 + 1e-12
    assert gamma <= 1.0 - (1.0 - k) ** len(branch) + 1e-12
    assert gamma == pytest.approx(oracles.ema(k, branch, variable), abs=1e-12)
    if all(s == variable for s in branch):
        assert gamma == 0.0


@given(branch=st.lists(st.integers(0, 4), max_size=12), variable=st.integers(0, 4), k=st.floats(0.0, 1.0))
@settings(max_examples=500)
def test_new_variable_bounds(branch, variable, k):
    gamma = penalty(PenaltyKind.NEW_VARIABLE, k, branch, variable)
    assert gamma in (0.0, k)
    assert gamma == penalty(PenaltyKind.NEW_VARIABLE, k, sorted(branch), variable)
