"""Exception hierarchy.

Two families: :class:`ValidationError` for bad input (CLI exit code 2) and
:class:`NumericalError` for numerical breakdowns (CLI exit code 3).
"""


class CaraPruneError(Exception):
    """Base class for all library errors."""


class ValidationError(CaraPruneError, ValueError):
    pass


class NumericalError(CaraPruneError, ArithmeticError):
    pass


# measure
class UnalignableSupports(ValidationError):
    pass


class BothZero(ValidationError):
    pass


class TargetUnreachable(ValidationError):
    pass


# basis
class EvaluationDomain(ValidationError):
    pass


# givens_qr
class NonFiniteInput(ValidationError):
    pass


class IndexNotInWindow(ValidationError):
    pass


# pruning
class ZeroKernel(NumericalError):
    pass


class RankCollapse(NumericalError):
    pass


class StreamTooShort(ValidationError):
    pass


# baselines
class MaxIterationsExceeded(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


# io_stream
class ParseError(ValidationError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NonPositiveWeight(ParseError):
    pass


class BadMagic(ValidationError):
    pass


class TruncatedFile(ValidationError):
    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class DimensionMismatch(ValidationError):
    pass


class AcceptanceTooLow(ValidationError):
    pass
