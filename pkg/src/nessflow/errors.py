"""Exception hierarchy shared by all nessflow modules."""


class NessflowError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class NonConvergent(NessflowError):
    """Adaptive quadrature hit its subdivision limit above tolerance."""

    exit_code = 3

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class DegenerateKernel(NessflowError):
    """The resistance formula has a vanishing or negative denominator."""

    exit_code = 3


class MissingKernel(NessflowError, ValueError):
    exit_code = 2


class StepTooLarge(NessflowError):
    """Finite-difference step so large that the O(h^2) error swamps the signal."""

    exit_code = 3


class BoundViolated(NessflowError, AssertionError):
    pass


class TruncationInsufficient(NessflowError):
    exit_code = 3

    def __init__(self, message, tail=None):
        super().__init__(message)
        self.tail = tail


class DimensionTooLow(NessflowError, ValueError):
    exit_code = 2


class InvalidIncidence(NessflowError, ValueError):
    exit_code = 2


class BadGeometry(NessflowError, ValueError):
    exit_code = 2


class NoPlateau(NessflowError):
    exit_code = 3


class ConfigError(NessflowError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
