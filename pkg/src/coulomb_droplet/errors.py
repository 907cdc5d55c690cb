"""Typed failures shared across modules.

The CLI maps DomainError (and subclasses) to exit code 2 and SolverError
(and subclasses) to exit code 3.
"""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class PhaseError(DomainError):
    """Operation not defined for the regime of the given parameters."""


class NearCriticalError(DomainError):
    """Parameters lie within the guard margin of a regime boundary."""


class SolverError(RuntimeError):
    """An iterative solver, root bracket or inversion did not converge."""


class QuadratureError(SolverError):
    """Quadrature tolerance not met or the moment matrix is not positive definite."""
