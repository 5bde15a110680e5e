"""Exception hierarchy shared by the solvers, checks and CLI."""


class BlockoptError(Exception):
    """Base class for all library errors."""


class DimensionError(BlockoptError, ValueError):
    """Operand dimensions do not agree."""


class ParameterError(BlockoptError, ValueError):
    """A parameter lies outside its admissible range.

    The message always names the field and the violated constraint.
    """

    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class InfeasibleError(BlockoptError, ValueError):
    """A point lies outside the domain of an indicator atom."""


class UnsupportedError(BlockoptError, TypeError):
    """The requested structure has no exact implementation."""


class PreconditionError(BlockoptError, ValueError):
    """Inputs to a check do not satisfy its stated precondition."""


class SolverError(BlockoptError, RuntimeError):
    """An iterative solver could not complete."""


class SubproblemError(SolverError):
    """An ADMM subproblem did not reach its inner tolerance.

    Attributes
    ----------
    iteration : int or None
        Outer iteration at which the failure occurred, once known.
    residual : float
        Last inner optimality residual.
    """

    def __init__(self, message, residual, iteration=None):
        self.residual = residual
        self.iteration = iteration
        super().__init__(message)
