"""Trainer exception types."""


class TrainerError(Exception):
    """Base class for trainer errors."""


class DatasetMissing(TrainerError):
    """The requested dataset is not available locally."""


class NonConvergence(TrainerError):
    """Validation accuracy stayed below the required floor after the epoch budget."""


class DivergenceDetected(TrainerError):
    """Discriminator loss collapsed for too many consecutive steps."""


class DimensionMismatch(TrainerError):
    """Conditioning dimension disagrees with the checkpoint."""


class ValidationError(TrainerError):
    """Invalid inputs or configuration (exit code 2)."""
