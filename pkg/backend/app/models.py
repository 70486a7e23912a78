import enum


class TaskKind(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class Criterion(str, enum.Enum):
    """Split criterion family as selected on the command line"""
    CART = "cart"
    OS_PURITY = "os-purity"
    HIGH_MEANS = "high-means"
    LOW_MEANS = "low-means"
    OS_EXTREME = "os-extreme"


class ClassImpurity(str, enum.Enum):
    GINI = "gini"
    ENTROPY = "entropy"


class ImpurityKind(str, enum.Enum):
    VARIANCE = "variance"
    GINI = "gini"
    CROSS_ENTROPY = "cross_entropy"
    HIGH_MEANS = "high_means"
    LOW_MEANS = "low_means"
    CLASS_EXTREME = "class_extreme"


class GainKind(str, enum.Enum):
    CART_REGRESSION = "cart_regression"
    CART_GINI = "cart_gini"
    CART_ENTROPY = "cart_entropy"
    ONE_SIDED_PURITY_REGRESSION = "one_sided_purity_regression"
    ONE_SIDED_PURITY_CLASSIFICATION = "one_sided_purity_classification"
    HIGH_MEANS = "high_means"
    LOW_MEANS = "low_means"
    ONE_SIDED_EXTREME_CLASSIFICATION = "one_sided_extreme_classification"

    @property
    def task(self) -> TaskKind:
        if self in _REGRESSION_GAINS:
            return TaskKind.REGRESSION
        return TaskKind.CLASSIFICATION

    @property
    def one_sided(self) -> bool:
        return self not in (GainKind.CART_REGRESSION, GainKind.CART_GINI, GainKind.CART_ENTROPY)

    @property
    def needs_class_of_interest(self) -> bool:
        return self is GainKind.ONE_SIDED_EXTREME_CLASSIFICATION

    @property
    def impurity(self) -> ImpurityKind:
        return _GAIN_IMPURITY[self]

    @property
    def label(self) -> str:
        """Short criterion name used in reports"""
        return _GAIN_LABELS[self]

    @classmethod
    def resolve(
        cls,
        criterion: Criterion,
        task: TaskKind,
        class_impurity: ClassImpurity = ClassImpurity.GINI,
    ) -> "GainKind":
        """Map a (criterion, task) pair from the CLI onto a gain family"""
        if task == TaskKind.REGRESSION:
            table = {
                Criterion.CART: cls.CART_REGRESSION,
                Criterion.OS_PURITY: cls.ONE_SIDED_PURITY_REGRESSION,
                Criterion.HIGH_MEANS: cls.HIGH_MEANS,
                Criterion.OS_EXTREME: cls.HIGH_MEANS,
                Criterion.LOW_MEANS: cls.LOW_MEANS,
            }
            return table[criterion]

        if criterion in (Criterion.HIGH_MEANS, Criterion.LOW_MEANS):
            raise ValueError(f"criterion '{criterion.value}' requires a regression target")
        if criterion == Criterion.CART:
            return cls.CART_ENTROPY if class_impurity == ClassImpurity.ENTROPY else cls.CART_GINI
        if criterion == Criterion.OS_PURITY:
            return cls.ONE_SIDED_PURITY_CLASSIFICATION
        return cls.ONE_SIDED_EXTREME_CLASSIFICATION


_REGRESSION_GAINS = frozenset({
    GainKind.CART_REGRESSION,
    GainKind.ONE_SIDED_PURITY_REGRESSION,
    GainKind.HIGH_MEANS,
    GainKind.LOW_MEANS,
})

_GAIN_IMPURITY = {
    GainKind.CART_REGRESSION: ImpurityKind.VARIANCE,
    GainKind.CART_GINI: ImpurityKind.GINI,
    GainKind.CART_ENTROPY: ImpurityKind.CROSS_ENTROPY,
    GainKind.ONE_SIDED_PURITY_REGRESSION: ImpurityKind.VARIANCE,
    GainKind.ONE_SIDED_PURITY_CLASSIFICATION: ImpurityKind.GINI,
    GainKind.HIGH_MEANS: ImpurityKind.HIGH_MEANS,
    GainKind.LOW_MEANS: ImpurityKind.LOW_MEANS,
    GainKind.ONE_SIDED_EXTREME_CLASSIFICATION: ImpurityKind.CLASS_EXTREME,
}

_GAIN_LABELS = {
    GainKind.CART_REGRESSION: "cart",
    GainKind.CART_GINI: "cart",
    GainKind.CART_ENTROPY: "cart-entropy",
    GainKind.ONE_SIDED_PURITY_REGRESSION: "os-purity",
    GainKind.ONE_SIDED_PURITY_CLASSIFICATION: "os-purity",
    GainKind.HIGH_MEANS: "high-means",
    GainKind.LOW_MEANS: "low-means",
    GainKind.ONE_SIDED_EXTREME_CLASSIFICATION: "os-extreme",
}


class PenaltyKind(str, enum.Enum):
    NONE = "none"
    NEW_VARIABLE = "new-variable"
    EMA = "ema"


class OutputFormat(str, enum.Enum):
    JSON = "json"
    DOT = "dot"
    TEXT = "text"
    CSV = "csv"
