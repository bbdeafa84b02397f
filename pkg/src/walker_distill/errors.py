"""Exception hierarchy shared by every pipeline stage."""

from typing import Any


class WalkerDistillError(Exception):
    """Base class for all errors raised by walker_distill."""


class ConfigurationError(WalkerDistillError):
    """A run config, model or protocol is inconsistent or incompatible."""


class InvalidArgumentError(WalkerDistillError, ValueError):
    """A function argument is out of its valid domain."""


class NumericalError(WalkerDistillError):
    """Training or simulation produced non-finite values."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingDivergedError(WalkerDistillError):
    """A training run collapsed; the last good artifacts were kept on disk."""


class DatasetFormatError(WalkerDistillError):
    """A dataset file cannot be decoded."""


class BadMagicError(DatasetFormatError):
    """The file does not start with the dataset magic bytes."""


class TruncatedPayloadError(DatasetFormatError):
    """The payload ends before the declared record count."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class DimensionMismatchError(DatasetFormatError):
    """Header dimensions disagree with the manifest or the consumer."""
