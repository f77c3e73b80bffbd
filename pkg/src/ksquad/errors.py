"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input lies outside the domain where an operation is defined
    (collision, unbound orbit, chart boundary, ...)."""


class PreconditionError(ValueError):
    """Caller violated a documented precondition (non-unit rotor,
    non-orthonormal frame, ...)."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge."""
