"""Exception taxonomy shared across the package.

Every error raised on purpose derives from :class:`LowRankError` so callers
(and the CLI) can map failures to exit codes without string matching.
"""


class LowRankError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LowRankError, ValueError):
    """An argument violates a documented precondition."""


class SingularEvaluationError(LowRankError):
    """Evaluation requested at (or too close to) a pole."""

    def __init__(self, message, angle=None):
        super().__init__(message)
        self.angle = angle


class SingularLoopError(LowRankError):
    """The feedback loop is ill posed (1 - F*H vanishes identically)."""


class IndeterminateZeroError(LowRankError):
    """A root lies inside the unit-circle guard band; the requested
    factorization is not well defined there."""


class SingularProjectionError(LowRankError):
    """Causal projection requested for a function with a pole on the circle."""


class NumericError(LowRankError):
    """A numerical routine failed to meet its accuracy contract."""


class InconsistencyError(LowRankError):
    """Inputs are mutually inconsistent with the assumed model structure."""


class ConfigError(LowRankError):
    """A scenario configuration is invalid.

    ``fields`` lists every offending field with a human-readable reason.
    """

    def __init__(self, fields):
        self.fields = list(fields)
        super().__init__("invalid configuration: " + "; ".join(self.fields))
