"""Exception types raised across the toolkit."""


class MtlcvxError(Exception):
    """Base class for all toolkit errors."""


class ConstantColumnError(MtlcvxError):
    """A design-matrix column has zero sample variance and cannot be scaled."""

    def __init__(self, task_id, column: int):
        self.task_id = task_id
        self.column = column
        super().__init__(f"task {task_id!r}: column {column} has zero variance")


class SchemaMismatchError(MtlcvxError):
    """CSV rows do not match the declared header layout."""


class NonNumericCellError(MtlcvxError):
    """A CSV cell could not be parsed as a number."""

    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"row {row}: column {column!r} is not numeric")


class TooFewSamplesError(MtlcvxError):
    """A task is too small for the requested split."""

    def __init__(self, task_id, message: str = ""):
        self.task_id = task_id
        super().__init__(message or f"task {task_id!r} has too few samples for the split")


class SingleClassError(MtlcvxError):
    """A binary task contains only one response class."""

    def __init__(self, task_id):
        self.task_id = task_id
        super().__init__(f"task {task_id!r} has a single response class")


class DegenerateKError(MtlcvxError):
    """Neighbor count k is outside the valid range [1, T-1]."""


class EmptyGraphError(MtlcvxError):
    """The task graph has no edges where at least one is required."""


class SingularSystemError(MtlcvxError):
    """A linear system that must be solved exactly is singular."""


class SeparationError(MtlcvxError):
    """Unpenalized logistic fit diverged; the classes are separable."""


class HessianSingularError(MtlcvxError):
    """Newton step impossible: the curvature matrix collapsed."""


class DimensionMismatchError(MtlcvxError):
    """Array shapes are inconsistent with each other."""


class ZeroVarianceError(MtlcvxError):
    """A reference response vector has zero variance; NMSE is undefined."""

    def __init__(self, task_id):
        self.task_id = task_id
        super().__init__(f"task {task_id!r}: reference response has zero variance")


class ConfigInvalidError(MtlcvxError):
    """A configuration object failed validation."""


class NonConvergenceError(MtlcvxError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    Carries the best iterate found so the caller can decide whether to use it.
    """

    def __init__(self, message: str, *, iterations: int, state=None, residuals=None):
        self.iterations = iterations
        self.state = state
        self.residuals = residuals
        super().__init__(message)
