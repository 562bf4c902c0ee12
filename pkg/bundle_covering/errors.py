"""Exception hierarchy shared by the library and the CLI."""


class CoveringError(Exception):
    """Base class for every error raised by bundle_covering"""


class IntervalError(CoveringError, ArithmeticError):
    """Invalid interval construction or operation"""


class DivisionByZeroError(IntervalError, ZeroDivisionError):
    """Division by an interval that contains zero"""


class IntervalOverflowError(IntervalError, OverflowError):
    """An endpoint left the finite floating point range"""


class ExpressionError(CoveringError, ValueError):
    """Malformed or unsupported map expression"""


class UnknownMapError(CoveringError, LookupError):
    """No builtin map or homotopy with the requested name"""


class ParameterError(CoveringError, ValueError):
    """Missing or out-of-range parameter"""


class DegreeError(CoveringError):
    """The degree of a circle map could not be certified"""


class ConfigError(CoveringError, ValueError):
    """Invalid run configuration"""


class EvaluationError(CoveringError):
    """Interval evaluation of a map failed on a specific cell"""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell

    def __str__(self):
        message = super().__str__()
        if self.cell is None:
            return message
        return f"{message} (cell {self.cell})"
