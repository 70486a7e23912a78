from __future__ import annotations

import itertools
import json
import os
import sys
import tempfile
from typing import List, Optional, Sequence, Union

import pandas as pd
import structlog
from pydantic import ValidationError

from app.engines.grower import Tree, TreeNode, SplitRule
from app.engines.interpretability import tree_rules
from app.engines.penalty import BranchPath, extend_branch
from app.exceptions import ModelFormatError, UnreadableFile
from app.models import OutputFormat, TaskKind
from app.schemas import CompareRow, ModelDocument, NodeRecord, OobReport, TunePoint

logger = structlog.get_logger()

FORMAT_VERSION = 1

COMPARE_COLUMNS = [
    "dataset",
    "criterion",
    "penalty",
    "oob_loss",
    "loss_increase_pct",
    "avg_k_star",
    "mean_holdout_frac",
]


# Model documents
def to_document(tree: Tree) -> ModelDocument:
    def record(node: TreeNode) -> NodeRecord:
        if node.is_terminal:
            return NodeRecord(n=node.n, impurity=node.impurity, fitted=node.fitted)
        return NodeRecord(
            n=node.n,
            impurity=node.impurity,
            variable=tree.feature_names[node.rule.variable],
            threshold=node.rule.threshold,
            left=record(node.left),
            right=record(node.right),
        )

    return ModelDocument(
        format_version=FORMAT_VERSION,
        task=tree.task,
        feature_names=list(tree.feature_names),
        class_labels=list(tree.class_labels),
        config=tree.config,
        root=record(tree.root),
        training=tree.training,
    )


def from_document(document: ModelDocument) -> Tree:
    if document.format_version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {document.format_version} (expected {FORMAT_VERSION})"
        )
    names = list(document.feature_names)
    is_classification = document.task == TaskKind.CLASSIFICATION

    def build(record: NodeRecord, branch: BranchPath, depth: int) -> TreeNode:
        if record.variable is None:
            fitted = int(record.fitted) if is_classification else float(record.fitted)
            if is_classification and not 0 <= fitted < len(document.class_labels):
                raise ModelFormatError(f"terminal class index {fitted} has no label")
            return TreeNode(n=record.n, depth=depth, branch=branch, impurity=record.impurity, fitted=fitted)
        if record.variable not in names:
            raise ModelFormatError(f"split variable '{record.variable}' is not a model feature")
        variable = names.index(record.variable)
        child_branch = extend_branch(branch, variable)
        return TreeNode(
            n=record.n,
            depth=depth,
            branch=branch,
            impurity=record.impurity,
            rule=SplitRule(variable, float(record.threshold)),
            left=build(record.left, child_branch, depth + 1),
            right=build(record.right, child_branch, depth + 1),
        )

    return Tree(
        root=build(document.root, (), 0),
        config=document.config,
        feature_names=tuple(names),
        task=document.task,
        n_rows=document.root.n,
        class_labels=tuple(document.class_labels),
        training=document.training,
    )


def serialize(tree: Tree) -> bytes:
    """Canonical JSON: sorted keys, shortest round-trip floats, absent fields omitted"""
    payload = to_document(tree).model_dump(mode="json", exclude_none=True)
    return (json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def deserialize(data: Union[bytes, str]) -> Tree:
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"model document is not valid JSON: {e}")
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ModelFormatError("model document has no format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {payload['format_version']} (expected {FORMAT_VERSION})"
        )
    try:
        document = ModelDocument.model_validate(payload)
    except ValidationError as e:
        raise ModelFormatError(f"invalid model document: {e.errors()[0]['msg']}")
    return from_document(document)


def read_model(path: str) -> Tree:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise UnreadableFile(path, e.strerror or str(e))
    return deserialize(data)


# Rendering
def fitted_label(tree: Tree, fitted) -> str:
    if tree.task == TaskKind.CLASSIFICATION:
        return tree.class_labels[fitted]
    return f"{fitted:.4g}"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(tree: Tree) -> str:
    """Graphviz digraph; left edges are "yes" (x <= threshold), right edges "no" """
    lines = ["digraph tree {", '  node [shape=box, fontname="Helvetica"];']
    counter = itertools.count()

    def emit(node: TreeNode) -> int:
        node_id = next(counter)
        if node.is_terminal:
            label = f"{_dot_escape(fitted_label(tree, node.fitted))}\\nn = {node.n}"
            lines.append(f'  n{node_id} [label="{label}", shape=ellipse];')
            return node_id
        name = tree.feature_names[node.rule.variable]
        label = f"{_dot_escape(name)} ≤ {node.rule.threshold:.4g}\\nn = {node.n}"
        lines.append(f'  n{node_id} [label="{label}"];')
        left_id = emit(node.left)
        lines.append(f'  n{node_id} -> n{left_id} [label="yes"];')
        right_id = emit(node.right)
        lines.append(f'  n{node_id} -> n{right_id} [label="no"];')
        return node_id

    emit(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_text(tree: Tree) -> str:
    """Indented listing followed by one rule per terminal"""
    lines: List[str] = []

    def walk(node: TreeNode, indent: str) -> None:
        if node.is_terminal:
            lines.append(f"{indent}|--- value: {fitted_label(tree, node.fitted)} (n = {node.n})")
            return
        name = tree.feature_names[node.rule.variable]
        threshold = f"{node.rule.threshold:.4g}"
        lines.append(f"{indent}|--- {name} <= {threshold}")
        walk(node.left, indent + "|   ")
        lines.append(f"{indent}|--- {name} >  {threshold}")
        walk(node.right, indent + "|   ")

    walk(tree.root, "")
    lines.append("")
    lines.append("Rules:")
    for rule in tree_rules(tree):
        condition = " AND ".join(str(c) for c in rule.conditions) or "always"
        lines.append(f"  IF {condition} THEN {fitted_label(tree, rule.fitted)} (n = {rule.n})")
    return "\n".join(lines) + "\n"


def render(tree: Tree, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.DOT:
        return render_dot(tree)
    if fmt == OutputFormat.TEXT:
        return render_text(tree)
    if fmt == OutputFormat.JSON:
        return serialize(tree).decode("utf-8")
    raise ValueError(f"trees cannot be rendered as {fmt.value}")


def training_line(tree: Tree) -> str:
    summary = tree.training
    if summary is None:
        return ""
    if tree.task == TaskKind.REGRESSION:
        return f"R² = {summary.r2:.4f}"
    return f"MR = {summary.misclassification_rate:.4f}"


# Reports
def compare_frame(rows: Sequence[CompareRow]) -> pd.DataFrame:
    columns = list(COMPARE_COLUMNS)
    if any(row.class_of_interest is not None for row in rows):
        columns.append("class_of_interest")
    return pd.DataFrame([row.model_dump() for row in rows], columns=columns)


def oob_frame(report: OobReport, dataset_name: str = "") -> pd.DataFrame:
    row = {
        "dataset": dataset_name,
        "criterion": report.gain_kind.label,
        "penalty": report.penalty.value,
        "oob_loss": report.r_oob,
        "avg_k_star": report.mean_k_star,
        "mean_holdout_frac": report.mean_holdout_frac,
    }
    if report.task == TaskKind.REGRESSION:
        row["oob_r2"] = report.oob_r2
    else:
        row["oob_misclassification"] = report.oob_misclassification
    row["replicates"] = len(report.losses)
    row["dropped"] = len(report.dropped_replicates)
    return pd.DataFrame([row])


def trace_frame(trace: Sequence[TunePoint], task: TaskKind) -> pd.DataFrame:
    score = "r2" if task == TaskKind.REGRESSION else "misclassification_rate"
    columns = ["k", "loss", score, "eligible", "n_terminals", "total_predictors"]
    return pd.DataFrame([point.model_dump() for point in trace], columns=columns)


def predictions_frame(tree: Tree, predictions) -> pd.DataFrame:
    if tree.task == TaskKind.CLASSIFICATION:
        values = [tree.class_labels[int(p)] for p in predictions]
    else:
        values = [float(p) for p in predictions]
    return pd.DataFrame({"prediction": values})


def format_frame(frame: pd.DataFrame, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.TEXT:
        return frame.to_string(index=False) + "\n"
    if fmt == OutputFormat.JSON:
        return frame.to_json(orient="records", indent=2) + "\n"
    return frame.to_csv(index=False, lineterminator="\n")


# Output
def write_atomic(path: str, data: Union[bytes, str]) -> None:
    """Write through a temp file in the target directory, then rename over `path`"""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(prefix=".treepen-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.info("Output written", path=path, bytes=len(data))


def emit(data: Union[bytes, str], path: Optional[str] = None) -> None:
    """Atomic write to `path`, or stdout when no path (or "-") is given"""
    if path and path != "-":
        write_atomic(path, data)
        return
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    sys.stdout.write(data)
    sys.stdout.flush()
