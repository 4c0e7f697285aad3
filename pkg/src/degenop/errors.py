"""Exception and warning classes raised by :mod:`degenop`."""


class DegenopError(Exception):
    """Base class for all package errors."""


class DomainError(DegenopError, ValueError):
    """An argument lies outside the domain of a map or operation."""


class ValidationError(DomainError):
    """Model data has the wrong sign or shape."""


class BCError(DegenopError, ValueError):
    """A boundary-condition description is malformed."""


class ConditionError(DegenopError):
    """Structural conditions on the problem data are violated.

    ``report`` holds the :class:`~degenop.boundary.BCReport` that
    produced the error, when one exists.
    """

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class EtaDegenerate(ConditionError):
    """The boundary determinant vanishes, so the two-point problem is not regular."""


class SingularSystem(DegenopError):
    """A sparse factorization failed or produced a non-finite solution.

    Usually means the spectral parameter sits on the discrete spectrum or
    the boundary conditions are degenerate.
    """


class DivisionByZero(DegenopError, ZeroDivisionError):
    """A ratio was requested whose denominator is identically zero."""


class CallbackFailure(DegenopError):
    """A user callback raised or returned non-finite values."""


class NoContraction(DegenopError):
    """Picard increments grew for several consecutive iterations.

    Shrinking the horizon or the domain usually restores contraction.
    ``report`` carries the partial :class:`~degenop.nonlinear.IterationReport`.
    """

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class BallExit(NoContraction):
    """An iterate left the ball around the base solution."""


class SchemaError(DegenopError, ValueError):
    """A run configuration failed validation.

    ``errors`` is a list of ``(key_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))


class StabilityWarning(UserWarning):
    """Emitted when a time integrator shows signs of spurious oscillation."""


class ConditionWarning(UserWarning):
    """Emitted for soft violations of structural conditions."""
