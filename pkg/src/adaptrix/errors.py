"""Exception hierarchy.

The CLI maps these onto exit codes: argument errors exit 2, data errors
exit 3 and numerical failures exit 4.
"""


class AdaptrixError(Exception):
    """Base class for all errors raised by the package."""


class ArgumentError(AdaptrixError, ValueError):
    """An argument violates a documented precondition."""


class DataError(AdaptrixError, ValueError):
    """Input data could not be parsed or is unusable."""


class NumericalError(AdaptrixError, ArithmeticError):
    """A numerical procedure failed or hit a degenerate configuration."""


class DegenerateGeometryError(NumericalError):
    """The point configuration makes the requested quantity undefined."""


class DisconnectedGraphError(NumericalError):
    """A neighborhood graph splits into several connected components."""

    def __init__(self, n_components, message=None):
        self.n_components = n_components
        super().__init__(
            message
            or f"neighborhood graph has {n_components} connected components"
        )


class StageError(AdaptrixError):
    """Wraps an error with the pipeline stage that produced it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} stage failed: {cause}")
