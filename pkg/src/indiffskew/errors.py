"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation 2, numeric 3, data 4.
"""


class IndiffError(Exception):
    exit_code = 1


class ValidationError(IndiffError, ValueError):
    exit_code = 2


class DomainError(ValidationError):
    """Input outside the region where an operation is defined."""


class NumericError(IndiffError, ArithmeticError):
    exit_code = 3


class InconclusiveSupError(NumericError):
    """Numerical supremum attained on the edge of the search window."""


class InstabilityError(NumericError):
    pass


class NoSolutionError(NumericError):
    """Implied-volatility inversion has no root in the bracket."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class SimulationError(NumericError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DataError(IndiffError):
    exit_code = 4


class InsufficientDataError(DataError):
    pass


class UnidentifiableError(DataError):
    pass
