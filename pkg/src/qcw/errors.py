"""Exception hierarchy shared by every module of the package."""


class QCWError(Exception):
    """Base class for all errors raised by :mod:`qcw`."""


class ParameterError(QCWError, ValueError):
    """An argument is outside the domain of the operation."""


class DomainError(ParameterError):
    """The model point lies outside the region where a formula applies."""


class CapacityError(ParameterError):
    """The requested system is too large for the chosen method."""


class UnsupportedOperation(QCWError, NotImplementedError):
    """The operation is not available for this model (e.g. non-quadratic P)."""


class NumericError(QCWError, ArithmeticError):
    """An iterative numerical method failed to converge."""


class InvariantViolation(QCWError, RuntimeError):
    """An internal invariant was broken; this indicates a bug."""
