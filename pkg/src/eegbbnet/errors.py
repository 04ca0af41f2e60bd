"""Exception types shared across the package.

Everything derives from ``EegBbnetError`` so callers can catch the whole
family; the finer classes distinguish bad parameters from bad data from
bad files.
"""


class EegBbnetError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EegBbnetError, ValueError):
    """An argument value is outside its documented domain."""


class ValidationError(EegBbnetError, ValueError):
    """Input data violates a precondition (non-finite samples, bad shape)."""


class DegenerateSignalError(ValidationError):
    """A channel is constant (zero variance), so the requested quantity is undefined."""


class StatisticsError(ValidationError):
    """Batch statistics cannot be computed (e.g. a train-mode batch of one)."""


class ShapeError(EegBbnetError, ValueError):
    """Array dimensions do not conform to the operation."""


class DegenerateGraphError(EegBbnetError, ValueError):
    """A graph node has zero degree and cannot be normalized."""


class FormatError(EegBbnetError, ValueError):
    """A serialized container is malformed.

    ``offset`` carries the byte position at which the problem was detected,
    when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingDivergedError(EegBbnetError, RuntimeError):
    """Training produced a non-finite loss or gradient; carries diagnostics."""
