"""Exception hierarchy. Everything raised on bad input derives from KernelR2Error."""


class KernelR2Error(Exception):
    """Base class for all library errors."""


class DimensionMismatch(KernelR2Error, ValueError):
    pass


class InvalidRotation(KernelR2Error, ValueError):
    pass


class DegenerateSample(KernelR2Error, ValueError):
    pass


class EmptySample(KernelR2Error, ValueError):
    pass


class InsufficientPoints(KernelR2Error, ValueError):
    pass


class NotPositiveDefinite(KernelR2Error, ArithmeticError):
    pass


class DegenerateVariance(KernelR2Error, ArithmeticError):
    pass


class GuardExceeded(KernelR2Error, ValueError):
    pass


class NotScalar(KernelR2Error, ValueError):
    pass


class DegeneratePopulationVariance(KernelR2Error, ArithmeticError):
    def __init__(self, message, y=None):
        super().__init__(message)
        self.y = y


class ParseError(KernelR2Error, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingValue(ParseError):
    pass


class ConstantColumn(KernelR2Error, ValueError):
    pass


class ValidationError(KernelR2Error, ValueError):
    pass
