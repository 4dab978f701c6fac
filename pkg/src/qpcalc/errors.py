"""Exception hierarchy shared by every qpcalc module."""


class QPError(Exception):
    """Base class for all qpcalc errors."""


class UnknownCoordinate(QPError):
    pass


class ChartMismatch(QPError):
    pass


class DegreeMismatch(QPError):
    pass


class MissingDerivativeClosure(QPError):
    pass


class WrongChartDegree(QPError):
    pass


class SingularD(QPError):
    """The odd-odd block of a supermatrix has a non-invertible body."""


class NotInvertible(QPError):
    pass


class InvalidData(QPError):
    """Structure data violates a declared invariant (symmetry, closedness, ...)."""


class ModelError(QPError):
    """Error attached to a location in a model file."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class ModelSyntaxError(ModelError):
    pass


class UndeclaredIdentifier(ModelError):
    pass


class IndexOutOfRange(ModelError):
    pass


class ModelDegreeMismatch(ModelError, DegreeMismatch):
    pass
