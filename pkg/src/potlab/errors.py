"""Exception types shared across the package."""


class PotlabError(Exception):
    """Base class for all errors raised by potlab."""


class DomainError(PotlabError, ValueError):
    """A point or parameter lies outside the admissible set."""


class SingularPointError(PotlabError, ValueError):
    """A kernel was evaluated on its diagonal (x == y)."""


class ToleranceFailure(PotlabError, RuntimeError):
    """Quadrature could not reach the requested relative error.

    The best estimate and the achieved error are kept on the exception so a
    caller may decide to accept them anyway.
    """

    def __init__(self, message, value=float("nan"), achieved=float("inf")):
        super().__init__(message)
        self.value = value
        self.achieved = achieved


class DivergenceError(PotlabError, ArithmeticError):
    """An integral was detected to grow without bound under truncation changes."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)


class NonConvergence(PotlabError, RuntimeError):
    """An iterative optimizer stopped before meeting its stopping rule."""

    def __init__(self, message, last_iterate=None, kkt_residual=float("inf")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.kkt_residual = kkt_residual


class InvariantViolation(PotlabError, AssertionError):
    """An asserted numerical certificate failed (monotonicity, invariant set...)."""
