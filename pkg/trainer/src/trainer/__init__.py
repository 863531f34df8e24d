"""Training component: closed-set classifier, conditional GAN, and the
K+1-class classifier, emitting activation dumps in the shared file format."""

from .classifier import ClassifierArtifacts, load_classifier, train_classifier
from .data import Dataset, TrainSpec, generate_synthetic, load_dataset, split_per_class
from .errors import (
    DatasetMissing,
    DimensionMismatch,
    DivergenceDetected,
    NonConvergence,
    TrainerError,
    ValidationError,
)
from .gan import GanArtifacts, generate, train_gan
from .models import ConvClassifier, Discriminator, Generator

__version__ = "0.1.0"

__all__ = [
    "ClassifierArtifacts",
    "ConvClassifier",
    "Dataset",
    "DatasetMissing",
    "DimensionMismatch",
    "Discriminator",
    "DivergenceDetected",
    "GanArtifacts",
    "Generator",
    "NonConvergence",
    "TrainSpec",
    "TrainerError",
    "ValidationError",
    "generate",
    "generate_synthetic",
    "load_classifier",
    "load_dataset",
    "split_per_class",
    "train_classifier",
    "train_gan",
]
