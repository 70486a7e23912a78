from __future__ import annotations

from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models import GainKind, OutputFormat, PenaltyKind, TaskKind


def default_k_grid() -> List[float]:
    return [round(0.01 * i, 2) for i in range(1, 100)]


# Fitting configuration
class GrowConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    gain_kind: GainKind
    penalty: PenaltyKind = PenaltyKind.NONE
    k: float = Field(default=0.0, ge=0.0, le=1.0)
    min_node_fraction: float = Field(default=0.05, gt=0.0, lt=0.5)
    class_of_interest: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_class_of_interest(self) -> "GrowConfig":
        if self.gain_kind.needs_class_of_interest and self.class_of_interest is None:
            raise ValueError(f"{self.gain_kind.value} requires a class of interest")
        return self

    def with_k(self, k: float) -> "GrowConfig":
        return self.model_copy(update={"k": k})

    def with_penalty(self, penalty: PenaltyKind) -> "GrowConfig":
        return self.model_copy(update={"penalty": penalty})


class TuneConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    base: GrowConfig
    k_grid: List[float] = Field(default_factory=default_k_grid)
    c: float = Field(default=0.10, ge=0.0)

    @field_validator("k_grid")
    @classmethod
    def _check_grid(cls, grid: List[float]) -> List[float]:
        if not grid:
            raise ValueError("k grid must not be empty")
        if any(k < 0.0 or k > 1.0 for k in grid):
            raise ValueError("k grid values must lie in [0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("k grid must be strictly ascending")
        return grid


class OobConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    grow: GrowConfig
    tune: Optional[TuneConfig] = None
    replicates: int = Field(default=100, ge=1)
    base_seed: int = Field(default=0, ge=0)
    n_jobs: int = Field(default=1, ge=1)

    @property
    def penalty(self) -> PenaltyKind:
        return self.grow.penalty

    def with_grow(self, **fields) -> "OobConfig":
        """Copy with `fields` replaced in the fitting config (and the tuning base, if tuning)"""
        update = {"grow": self.grow.model_copy(update=fields)}
        if self.tune is not None:
            update["tune"] = self.tune.model_copy(update={"base": self.tune.base.model_copy(update=fields)})
        return self.model_copy(update=update)

    def with_penalty(self, penalty: PenaltyKind) -> "OobConfig":
        return self.with_grow(penalty=penalty)


# Reports
class TunePoint(BaseModel):
    k: float
    loss: float
    r2: Optional[float] = None
    misclassification_rate: Optional[float] = None
    eligible: bool
    n_terminals: int
    total_predictors: int


class OobReport(BaseModel):
    task: TaskKind
    gain_kind: GainKind
    penalty: PenaltyKind
    n_rows: int
    replicate_ids: List[int]
    losses: List[float]
    holdout_sizes: List[int]
    k_stars: List[float]
    r_oob: float
    mean_k_star: float
    oob_r2: Optional[float] = None
    oob_misclassification: Optional[float] = None
    mean_holdout_frac: float
    dropped_replicates: List[int] = Field(default_factory=list)


class CompareRow(BaseModel):
    dataset: str
    criterion: str
    penalty: str
    oob_loss: float
    loss_increase_pct: float
    avg_k_star: float
    mean_holdout_frac: float
    class_of_interest: Optional[str] = None


class TerminalMetrics(BaseModel):
    path: List[str]
    depth: int
    distinct: int
    switches: int
    fitted: Union[int, float]
    n: int


class InterpretabilityMetrics(BaseModel):
    terminals: List[TerminalMetrics]
    max_distinct: int
    mean_distinct: float
    mean_switches: float
    total_predictors: int
    predictors: List[str]
    max_depth: int
    n_terminals: int


# Model document
class NodeRecord(BaseModel):
    n: int
    impurity: float
    variable: Optional[str] = None
    threshold: Optional[float] = None
    left: Optional["NodeRecord"] = None
    right: Optional["NodeRecord"] = None
    fitted: Optional[Union[int, float]] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "NodeRecord":
        internal = self.variable is not None
        if internal and (self.threshold is None or self.left is None or self.right is None):
            raise ValueError("internal node records need threshold, left and right")
        if not internal and self.fitted is None:
            raise ValueError("terminal node records need a fitted value")
        return self


class TrainingSummary(BaseModel):
    n_rows: int
    loss: float
    r2: Optional[float] = None
    misclassification_rate: Optional[float] = None


class ModelDocument(BaseModel):
    format_version: int
    task: TaskKind
    feature_names: List[str]
    class_labels: List[str] = Field(default_factory=list)
    config: GrowConfig
    root: NodeRecord
    training: Optional[TrainingSummary] = None


NodeRecord.model_rebuild()


# HTTP bodies
class FitRequest(BaseModel):
    csv_text: str
    target: str
    task: Optional[TaskKind] = None
    gain_kind: GainKind
    penalty: PenaltyKind = PenaltyKind.NONE
    k: float = Field(default=0.0, ge=0.0, le=1.0)
    min_node_fraction: float = Field(default=0.05, gt=0.0, lt=0.5)
    class_of_interest: Optional[str] = None


class PredictRequest(BaseModel):
    model: ModelDocument
    rows: List[Dict[str, float]]


class PredictResponse(BaseModel):
    predictions: List[Union[str, float]]


class RenderRequest(BaseModel):
    model: ModelDocument
    format: OutputFormat = OutputFormat.DOT
