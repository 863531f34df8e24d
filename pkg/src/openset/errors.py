"""Exception types shared across the package."""


class OpenSetError(Exception):
    """Base class for all package errors."""


class InsufficientData(OpenSetError):
    """Too few samples to fit a model."""


class DegenerateTail(OpenSetError):
    """All tail values are equal; the Weibull MLE is undefined."""


class ParseError(OpenSetError):
    """A dump line failed to parse; the message carries the line number."""


class DimensionMismatch(OpenSetError):
    """Vector lengths disagree."""


class EmptyClass(OpenSetError):
    """No contributing records for a class."""


class MissingPrediction(OpenSetError):
    """A generated record lacks a classifier prediction."""


class InvalidCounts(OpenSetError):
    """Counts or configuration values outside their valid range."""


class EmptyInput(OpenSetError):
    """An operation received no samples."""


class EmptySubset(OpenSetError):
    """The requested metric has no qualifying samples."""


class ConfigError(OpenSetError):
    """CLI or config-file validation failure (exit code 2)."""
