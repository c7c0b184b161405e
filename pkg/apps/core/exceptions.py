"""
Core exceptions.

Custom exceptions for the pipeline. Provides semantic error handling
across all layers (numerics, models, dataset I/O, commands).

Usage:
    from apps.core.exceptions import ConfigurationError, ShapeError

    try:
        prune(visual, instr, w_l, k=9, h=3)
    except ConfigurationError as e:
        raise CommandError(e.message, returncode=1)
"""


class BaseAppException(Exception):
    """Base exception for all application-specific exceptions."""

    def __init__(self, message: str, code: str = None, details: dict = None):
        """
        Initialize exception.

        Args:
            message: Human-readable error message
            code: Machine-readable error code (e.g., 'BAD_MAGIC')
            details: Additional context dictionary
        """
        self.message = message
        self.code = code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(BaseAppException):
    """Raised when a configuration value or argument combination is invalid."""

    pass


class ShapeError(BaseAppException):
    """Raised when tensor shapes or row counts do not line up."""

    pass


class DataIntegrityError(BaseAppException):
    """Raised when stored data cannot be trusted (corrupt files, bad records)."""

    pass


class SVT1FormatError(DataIntegrityError):
    """Raised when an SVT1 container cannot be parsed."""

    pass


class BadMagicError(SVT1FormatError):
    """Raised when a file does not start with the SVT1 magic bytes."""

    pass


class TruncatedPayloadError(SVT1FormatError):
    """Raised when a record header or payload ends before its declared size."""

    pass


class UnsupportedVersionError(SVT1FormatError):
    """Raised when the container version byte is not understood."""

    pass


class PlacementError(DataIntegrityError):
    """Raised when objects cannot be placed on the patch grid."""

    pass


class ProcessingError(BaseAppException):
    """Raised when a long-running job (training, evaluation) fails."""

    pass


class TrainingDivergedError(ProcessingError):
    """Raised when the training loss stops being finite."""

    pass


class CheckpointMismatchError(ProcessingError):
    """Raised when a checkpoint does not fit the model built from a config."""

    pass
