"""KS regularization, LCF coordinates and quadrupolar secular dynamics of the lunar
three-body problem, with numerical verification suites."""

from . import kepler, ksreg, lcf, quadrupolar, quat, threebody, verify
from .errors import ConvergenceError, DomainError, PreconditionError

__all__ = [
    "ConvergenceError",
    "DomainError",
    "PreconditionError",
    "kepler",
    "ksreg",
    "lcf",
    "quadrupolar",
    "quat",
    "threebody",
    "verify",
]

__version__ = "0.1.0"
