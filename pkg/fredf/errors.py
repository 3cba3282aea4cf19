"""Exceptions raised by fredf.

Every error derives from :class:`FreDFError` and from the builtin it
specializes, so callers may catch either ``FreDFError`` or, say,
``ValueError``.
"""


class FreDFError(Exception):
    """Base class for all fredf errors."""


class ShapeError(FreDFError, ValueError):
    """Tensor dimensions do not match what an operation requires."""


class UnsupportedLengthError(ShapeError):
    """Transform length is not supported (odd or shorter than 2)."""


class ContractError(FreDFError, ValueError):
    """An API precondition was violated."""


class PartitionError(FreDFError, ValueError):
    """A frequency band or band partition is invalid."""


class NumericError(FreDFError, ArithmeticError):
    """A value became NaN or infinite."""


class IngestionError(FreDFError, ValueError):
    """A dataset file could not be turned into a series table."""


class SplitError(FreDFError, ValueError):
    """A chronological split does not fit the table."""


class NormalizationError(FreDFError, ValueError):
    """Normalization statistics cannot be fitted or applied."""


class ConfigError(FreDFError, ValueError):
    """A resolved configuration violates its invariants."""


class CheckpointError(FreDFError, RuntimeError):
    """A checkpoint file is missing, corrupt or of an unknown version."""


class TrainingDivergedError(NumericError):
    """Training produced a non-finite loss.

    The partial :class:`~fredf.training.TrainReport` is attached as
    ``report`` so callers can still write it out.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class GradientCheckError(FreDFError, AssertionError):
    """Analytic gradients disagree with finite differences."""
