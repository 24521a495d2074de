"""Humor classifiers, the laughter-intensity regressor, and their training loops."""

from .artifact import ClipAudio, ModelArtifact, predict, predict_many
from .config import TrainConfig
from .heads import (
    INTENSITY_CAP_S,
    KINDS,
    ClassifierOutput,
    IntensityRegressor,
    ModelError,
    MultimodalClassifier,
    TextClassifier,
    build_model,
    count_parameters,
    format_count,
)
from .training import TrainingError, intensity_split, train_classifier, train_intensity

__all__ = [
    "INTENSITY_CAP_S",
    "KINDS",
    "ClassifierOutput",
    "ClipAudio",
    "IntensityRegressor",
    "ModelArtifact",
    "ModelError",
    "MultimodalClassifier",
    "TextClassifier",
    "TrainConfig",
    "TrainingError",
    "build_model",
    "count_parameters",
    "format_count",
    "intensity_split",
    "predict",
    "predict_many",
    "train_classifier",
    "train_intensity",
]
