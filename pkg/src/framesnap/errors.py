"""Exception types shared across the package."""


class FramesnapError(Exception):
    """Base class for all framesnap errors."""


class DuplicateEdge(FramesnapError):
    pass


class NonPositiveLength(FramesnapError):
    pass


class DisconnectedGraph(FramesnapError):
    pass


class BadPinDimension(FramesnapError):
    pass


class InsufficientKnots(FramesnapError):
    pass


class CollinearKnots(FramesnapError):
    """First three knots of a 3D unpinned realization are collinear; no canonical frame."""


class ZeroEdgeLength(FramesnapError):
    pass


class DimensionMismatch(FramesnapError):
    pass


class InvalidRealization(FramesnapError):
    pass


class NonSquareSystem(FramesnapError):
    pass


class PathBudgetExceeded(FramesnapError):
    pass


class SolverFailure(FramesnapError):
    pass


class StepLimitExceeded(FramesnapError):
    pass


class StartMismatch(FramesnapError):
    pass


class NotASaddle(FramesnapError):
    pass


class NoUndeformedRealization(FramesnapError):
    pass


class EmptyPath(FramesnapError):
    pass


class UnsupportedDimension(FramesnapError):
    pass


class DocumentSyntaxError(FramesnapError):
    """Malformed document text; carries the 1-based line/column of the defect."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DocumentSemanticError(FramesnapError):
    """Well-formed document that violates the framework schema; names the offending path."""

    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
