"""Exception types shared across the package."""


class SurfnsError(Exception):
    """Base class for all package-specific errors."""


class MeshStructureError(SurfnsError):
    """Mesh connectivity or compatibility violation."""


class DegenerateElementError(SurfnsError):
    """An element's metric tensor is singular or area-reversing."""


class SingularMatrixError(SurfnsError):
    """A sparse factorization failed (singular or indefinite-beyond-repair)."""


class IterationError(SurfnsError):
    """An iterative solver failed to reach its tolerance.

    Carries the solve report (if any) in ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(SurfnsError):
    """Configuration document could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class SimulationAborted(SurfnsError):
    """A time-stepping run aborted; carries the partial history.

    Attributes
    ----------
    state : SimulationState
        Last valid state before the failure.
    history : list
        Diagnostics records accumulated so far.
    cause : Exception
        The underlying error.
    """

    def __init__(self, message, state=None, history=None, cause=None):
        super().__init__(message)
        self.state = state
        self.history = history if history is not None else []
        self.cause = cause
