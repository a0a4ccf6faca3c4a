"""Exception types shared across the package.

The CLI maps these onto exit codes: data problems exit 1, bad requests
(unsupported option combinations, invalid parameters) exit 2.
"""


class PloopError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PloopError):
    """The input data violates a structural requirement."""


class RequestError(PloopError):
    """The requested analysis is invalid (bad parameters or combination)."""


class DegenerateAssignmentError(DataError):
    """All pairs assigned to the same arm; variance is undefined."""
