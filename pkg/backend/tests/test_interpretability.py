import pytest

from app.engines.grower import SplitRule, Tree, TreeNode, grow
from app.engines.interpretability import (
    distinct_variables,
    interpretability_metrics,
    predictors_used,
    tree_rules,
    variable_switches,
)
from app.models import GainKind, PenaltyKind, TaskKind
from app.schemas import GrowConfig
from tests.conftest import regression_dataset

CONFIG = GrowConfig(gain_kind=GainKind.CART_REGRESSION)


def _stump(threshold=2.0):
    return Tree(
        root=TreeNode(
            n=10, depth=0, branch=(), impurity=4.0,
            rule=SplitRule(1, threshold),
            left=TreeNode(n=6, depth=1, branch=(1,), impurity=0.5, fitted=1.0),
            right=TreeNode(n=4, depth=1, branch=(1,), impurity=0.25, fitted=5.5),
        ),
        config=CONFIG,
        feature_names=("rm", "lstat"),
        task=TaskKind.REGRESSION,
        n_rows=10,
    )


def test_branch_counts():
    assert distinct_variables([0, 1, 0, 1]) == 2
    assert variable_switches([0, 1, 0, 1]) == 3
    assert distinct_variables([]) == 0
    assert variable_switches([3]) == 0
    assert variable_switches([3, 3, 3]) == 0


def test_root_only_tree():
    tree = Tree(
        root=TreeNode(n=3, depth=0, branch=(), impurity=0.0, fitted=2.0),
        config=CONFIG,
        feature_names=("x0",),
        task=TaskKind.REGRESSION,
        n_rows=3,
    )
    metrics = interpretability_metrics(tree)
    assert metrics.max_distinct == 0
    assert metrics.mean_distinct == 0.0
    assert metrics.mean_switches == 0.0
    assert metrics.total_predictors == 0
    assert metrics.predictors == []
    assert metrics.n_terminals == 1
    assert metrics.max_depth == 0


def test_stump_metrics():
    metrics = interpretability_metrics(_stump())
    assert metrics.n_terminals == 2
    assert metrics.predictors == ["lstat"]
    assert [t.path for t in metrics.terminals] == [["lstat"], ["lstat"]]
    assert [t.n for t in metrics.terminals] == [6, 4]
    assert metrics.max_distinct == 1


def test_single_feature_tree_uses_one_predictor(step_regression):
    dataset = regression_dataset([step_regression.features[:, 0]], step_regression.target)
    tree = grow(dataset.all_rows(), CONFIG)
    metrics = interpretability_metrics(tree)
    assert metrics.total_predictors == 1
    assert metrics.max_distinct == 1
    assert all(t.switches == 0 for t in metrics.terminals)


def test_new_variable_penalty_never_adds_predictors(synthetic_regression):
    rows = synthetic_regression.all_rows()
    plain = grow(rows, CONFIG)
    penalized = grow(rows, CONFIG.with_penalty(PenaltyKind.NEW_VARIABLE).with_k(0.5))
    assert len(predictors_used(penalized)) <= len(predictors_used(plain))


def test_metrics_agree_with_branches(synthetic_regression):
    tree = grow(synthetic_regression.all_rows(), CONFIG.with_penalty(PenaltyKind.EMA).with_k(0.1))
    metrics = interpretability_metrics(tree)
    terminals = list(tree.terminals())
    assert metrics.n_terminals == len(terminals) == tree.n_terminals()
    assert metrics.max_depth == tree.max_depth()
    assert metrics.mean_distinct == pytest.approx(sum(distinct_variables(t.branch) for t in terminals) / len(terminals))
    assert metrics.total_predictors == len(predictors_used(tree))


def test_tree_rules():
    rules = tree_rules(_stump())
    assert [str(c) for c in rules[0].conditions] == ["lstat <= 2"]
    assert [str(c) for c in rules[1].conditions] == ["lstat > 2"]
    assert (rules[0].fitted, rules[0].n) == (1.0, 6)
    assert (rules[1].fitted, rules[1].n) == (5.5, 4)


def test_rules_cover_every_terminal(synthetic_regression):
    tree = grow(synthetic_regression.all_rows(), CONFIG)
    rules = tree_rules(tree)
    assert len(rules) == tree.n_terminals()
    assert sum(rule.n for rule in rules) == synthetic_regression.n_rows
    assert all(len(rule.conditions) == node.depth for rule, node in zip(rules, tree.terminals()))
