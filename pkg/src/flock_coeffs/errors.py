"""Exception types shared across the package."""


class FlockError(Exception):
    """Base class for all package errors."""


class DomainError(FlockError, ValueError):
    """Argument outside its mathematical domain (e.g. mu not in [-1, 1])."""


class ConfigError(FlockError, ValueError):
    """Invalid or inconsistent configuration (CLI flags, config file, kernels)."""


class PreconditionError(FlockError, ValueError):
    """A documented operation precondition is violated (e.g. nonzero-mean data)."""


class DegenerateWeightError(FlockError, ArithmeticError):
    """A weighted average was requested against a weight with vanishing integral."""


class NumericError(FlockError, ArithmeticError):
    """Non-finite value encountered; message carries the offending location."""


class SolverError(FlockError, RuntimeError):
    """Linear solve failed or produced an unusable solution.

    Carries a condition-number estimate when one is available.
    """

    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class InvariantError(FlockError, RuntimeError):
    """A structural invariant failed after convergence (indicates a bug)."""


class FieldStateError(FlockError, ValueError):
    """Discrete field state is invalid (non-unit orientation, negative density)."""


class GridShapeError(FlockError, ValueError):
    """Mismatched grid shapes between field arrays."""
