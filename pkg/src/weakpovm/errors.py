"""Exception hierarchy shared by all weakpovm modules."""


class WeakPovmError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(WeakPovmError, ValueError):
    pass


class NotHermitian(WeakPovmError, ValueError):
    pass


class DomainError(WeakPovmError, ValueError):
    """A matrix function was asked to act outside its domain.

    The offending eigenvalue is kept on ``eigenvalue``.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class BranchAmbiguity(WeakPovmError, ValueError):
    """A unitary has an eigenvalue too close to -1 for a principal logarithm."""


class CompletenessViolation(WeakPovmError, ValueError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SingularResidual(WeakPovmError, ValueError):
    pass


class WrongClass(WeakPovmError, TypeError):
    pass


class ClampExceeded(WeakPovmError, ValueError):
    pass


class OffLattice(WeakPovmError, ValueError):
    pass


class ConfigError(WeakPovmError, ValueError):
    pass


class DegenerateProbability(WeakPovmError, ArithmeticError):
    pass


class MaxStepsExceeded(WeakPovmError, RuntimeError):
    pass


class ParseError(WeakPovmError, ValueError):
    """Malformed instrument or state file."""
