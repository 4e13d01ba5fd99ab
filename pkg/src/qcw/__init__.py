"""Numerical laboratory for the quantum Curie-Weiss model.

Submodules
----------
circle        value types on the time circle S_beta
single_spin   exact one-circle functionals from 2x2 segment products
fk            puncture-process (random-cluster) samplers
mean_field    one-dimensional variational problem, phase diagram, stability constants
ed            exact diagonalisation (dense and total-spin blocks)
pimc          Trotter and continuous-time path-integral Monte Carlo
variational   checks of the dual problem and rate-function bounds
cli           command-line front end
"""
__version__ = "0.1.0"

from .circle import ModelParams, PiecewiseField, PointSet, SpinPath  # noqa: E402
from .errors import (  # noqa: E402
    CapacityError,
    DomainError,
    InvariantViolation,
    NumericError,
    ParameterError,
    QCWError,
    UnsupportedOperation,
)
from .mean_field import MfSolution, critical_beta, critical_lambda, f_value, solve_m_star  # noqa: E402

__all__ = [
    "__version__",
    "ModelParams",
    "PiecewiseField",
    "PointSet",
    "SpinPath",
    "MfSolution",
    "f_value",
    "solve_m_star",
    "critical_lambda",
    "critical_beta",
    "QCWError",
    "ParameterError",
    "DomainError",
    "CapacityError",
    "UnsupportedOperation",
    "NumericError",
    "InvariantViolation",
]
