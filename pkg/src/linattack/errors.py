"""Exception hierarchy shared by all linattack modules."""


class LinAttackError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(LinAttackError, ValueError):
    pass


class SymmetryError(LinAttackError, ValueError):
    pass


class SingularMatrixError(LinAttackError, ArithmeticError):
    """Raised for rank-deficient inputs; carries the smallest singular value seen."""

    def __init__(self, message, sigma_min=None):
        super().__init__(message)
        self.sigma_min = sigma_min


class NotPositiveDefiniteError(LinAttackError, ArithmeticError):
    pass


class DegenerateTargetError(LinAttackError, ValueError):
    pass


class InfeasibleRecoveryError(LinAttackError, ArithmeticError):
    pass


class OrderTooLowError(LinAttackError, ValueError):
    pass


class IncompleteMomentError(LinAttackError, KeyError):
    pass


class NumericalFailure(LinAttackError, RuntimeError):
    """A solver lost its bracket or produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnboundedAttackError(LinAttackError):
    """The rank-one budget reaches the smallest singular value; the attack value is -inf."""

    def __init__(self, message, certificate):
        super().__init__(message)
        self.certificate = certificate


class CsvParseError(LinAttackError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
