"""Exception hierarchy shared by all modules."""


class RandLAError(Exception):
    """Base class for every error raised by randla."""


class ShapeError(RandLAError, ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class DomainError(RandLAError, ValueError):
    """Input lies outside the mathematical domain (e.g. the zero matrix)."""


class DistributionError(RandLAError, ValueError):
    """A probability vector is invalid or cannot be formed."""


class FactorizationError(RandLAError, ArithmeticError):
    """A dense factorization failed to converge."""


class RankError(RandLAError, ArithmeticError):
    """A matrix (or its sketch) lost rank where full rank is required."""


class SketchFailure(RankError):
    """A random sketch stayed rank-deficient after all retries."""


class PreconditionError(RandLAError, ValueError):
    """A documented precondition on the inputs does not hold."""


class ConnectivityError(RandLAError, ValueError):
    """A graph is disconnected where connectivity is required."""


class SpecError(RandLAError, ValueError):
    """A generator description (GenSpec) is inconsistent."""


class ConvergenceError(RandLAError, ArithmeticError):
    """An iterative solver hit its iteration cap.

    The best iterate seen so far is kept on ``x`` so callers can still
    use it.
    """

    def __init__(self, message, x=None, iterations=0, residual=None):
        super().__init__(message)
        self.x = x
        self.iterations = iterations
        self.residual = residual
