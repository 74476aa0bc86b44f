"""Exception types shared across the package."""

from __future__ import annotations


class BPCureError(Exception):
    """Base class for all package errors."""


class DomainError(BPCureError):
    """A parameter or argument lies outside its mathematical domain."""


class IterationLimitError(BPCureError):
    """An iterative routine exhausted its iteration budget.

    Carries the best bracket or iterate seen so far in ``state`` so callers
    can inspect how close the routine got.
    """

    def __init__(self, message: str, state: object = None) -> None:
        super().__init__(message)
        self.state = state


class NonConvergenceError(BPCureError):
    """The optimizer finished without meeting the convergence criteria.

    ``result`` holds the best fit found so far.
    """

    def __init__(self, message: str, result: object = None) -> None:
        super().__init__(message)
        self.result = result


class NotPositiveDefiniteError(BPCureError):
    """A matrix required to be positive definite is not.

    ``eigenvalues`` records the offending spectrum when available.
    """

    def __init__(self, message: str, eigenvalues=None) -> None:
        super().__init__(message)
        self.eigenvalues = eigenvalues


class MismatchedDataError(BPCureError):
    """Array arguments disagree on length or shape."""


class DegenerateDataError(BPCureError):
    """The dataset cannot identify the model (no events, constant column, ...)."""


class UnachievableTargetError(BPCureError):
    """A calibration target cannot be reached within the allowed range."""


class MissingColumnError(BPCureError):
    """A required CSV column is absent."""


class NonNumericError(BPCureError):
    """A CSV cell could not be parsed as a number."""


class EmptyFileError(BPCureError):
    """The input file holds no data rows."""
