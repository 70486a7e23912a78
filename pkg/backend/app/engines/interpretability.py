from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from app.engines.grower import Fitted, Tree, TreeNode
from app.schemas import InterpretabilityMetrics, TerminalMetrics


def distinct_variables(branch: Sequence[int]) -> int:
    return len(set(branch))


def variable_switches(branch: Sequence[int]) -> int:
    """Adjacent unequal pairs along the branch"""
    return sum(1 for a, b in zip(branch, branch[1:]) if a != b)


def predictors_used(tree: Tree) -> List[int]:
    return sorted({node.rule.variable for node in tree.nodes() if not node.is_terminal})


def interpretability_metrics(tree: Tree) -> InterpretabilityMetrics:
    terminals = [
        TerminalMetrics(
            path=[tree.feature_names[v] for v in node.branch],
            depth=node.depth,
            distinct=distinct_variables(node.branch),
            switches=variable_switches(node.branch),
            fitted=node.fitted,
            n=node.n,
        )
        for node in tree.terminals()
    ]
    used = predictors_used(tree)
    return InterpretabilityMetrics(
        terminals=terminals,
        max_distinct=max(t.distinct for t in terminals),
        mean_distinct=sum(t.distinct for t in terminals) / len(terminals),
        mean_switches=sum(t.switches for t in terminals) / len(terminals),
        total_predictors=len(used),
        predictors=[tree.feature_names[v] for v in used],
        max_depth=max(t.depth for t in terminals),
        n_terminals=len(terminals),
    )


@dataclass(frozen=True)
class Condition:
    variable: str
    goes_left: bool
    threshold: float

    def __str__(self) -> str:
        operator = "<=" if self.goes_left else ">"
        return f"{self.variable} {operator} {self.threshold:.4g}"


@dataclass(frozen=True)
class Rule:
    conditions: Tuple[Condition, ...]
    fitted: Fitted
    n: int


def tree_rules(tree: Tree) -> List[Rule]:
    """One conjunction of branch conditions per terminal, left to right"""
    rules: List[Rule] = []

    def walk(node: TreeNode, conditions: Tuple[Condition, ...]) -> None:
        if node.is_terminal:
            rules.append(Rule(conditions, node.fitted, node.n))
            return
        name = tree.feature_names[node.rule.variable]
        walk(node.left, conditions + (Condition(name, True, node.rule.threshold),))
        walk(node.right, conditions + (Condition(name, False, node.rule.threshold),))

    walk(tree.root, ())
    return rules
