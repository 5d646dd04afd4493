"""Exception types raised by the solvers and validators."""


class GrushinError(Exception):
    """Base class for all package errors."""


class DomainError(GrushinError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class HypothesisError(GrushinError, ValueError):
    """A problem specification violates a structural hypothesis."""


class ThresholdError(GrushinError):
    """The parameter mu is above a threshold required by the construction."""


class BranchEmptyError(GrushinError):
    """No Nehari projection exists on the requested branch along a ray."""


class ConvergenceError(GrushinError):
    """An iterative solver stopped before meeting its tolerance.

    The best iterate found is attached as ``result`` so callers can still
    inspect or report it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
