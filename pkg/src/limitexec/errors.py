"""Exception types shared across the solvers."""


class LimitExecError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(LimitExecError, ValueError):
    pass


class OutOfRangeError(LimitExecError, ValueError):
    pass


class PreconditionError(LimitExecError, ValueError):
    pass


class ResourceLimitError(LimitExecError):
    pass


class ConfigError(LimitExecError, ValueError):
    """Bad configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalFailure(LimitExecError, ArithmeticError):
    """A root solve or march did not converge.

    ``bracket`` holds the last (lo, hi) search interval when available and
    ``node`` the (t, q) grid coordinates of the failing evaluation.
    """

    def __init__(self, message, bracket=None, node=None):
        super().__init__(message)
        self.bracket = bracket
        self.node = node


class InvalidStateError(LimitExecError, ValueError):
    """An object is in a state the operation cannot use."""
