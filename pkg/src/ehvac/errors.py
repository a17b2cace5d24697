"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class UnsupportedRegimeError(ValueError):
    """The request is well-formed but falls in a regime this library does not model."""


class ConvergenceError(RuntimeError):
    """A numerical procedure did not reach its tolerance.

    The best available estimate and the residual error are attached so that
    callers can decide whether the partial answer is still usable.
    """

    def __init__(self, message, estimate=None, residual=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
