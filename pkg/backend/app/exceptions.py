from typing import Optional


class TreepenError(Exception):
    """Base class for all errors raised by the tree engines"""


class DataError(TreepenError):
    """Input data or model documents that cannot be used (CLI exit code 2)"""


class ComputationError(TreepenError):
    """Invalid arguments reaching a numerical routine"""


class MissingColumn(DataError):
    def __init__(self, column: str, available: Optional[list] = None):
        self.column = column
        self.available = list(available or [])
        super().__init__(f"column '{column}' not found in header")


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str, reason: str = "not a finite number"):
        self.row = row
        self.column = column
        self.value = value
        shown = value if value != "" else "<empty>"
        super().__init__(f"row {row}, column '{column}': {shown!s} is {reason}")


class EmptyDataset(DataError):
    def __init__(self, path: str = ""):
        super().__init__(f"dataset {path} has no data rows".replace("  ", " "))


class MalformedCsv(DataError):
    """Rows that do not line up with the header"""


class UnreadableFile(DataError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot read {path}: {reason}")


class SingleClass(DataError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"classification target has a single class '{label}'")


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected} features, got {got}")


class FeatureMismatch(DataError):
    def __init__(self, column: str, detail: str):
        self.column = column
        super().__init__(f"feature column '{column}' {detail}")


class ModelFormatError(DataError):
    pass


class EmptyNode(ComputationError):
    def __init__(self):
        super().__init__("node statistics requested for an empty row set")


class KindMismatch(ComputationError):
    pass


class TaskMismatch(ComputationError):
    pass


class DegenerateChild(ComputationError):
    def __init__(self, n_left: int, n_right: int):
        super().__init__(f"split leaves an empty child (n_left={n_left}, n_right={n_right})")


class ZeroDenominator(ComputationError):
    """Parent node is already pure or constant for the criterion"""


class EmptyHoldout(ComputationError):
    def __init__(self, replicate: int):
        self.replicate = replicate
        super().__init__(f"bootstrap replicate {replicate} has an empty holdout set")
