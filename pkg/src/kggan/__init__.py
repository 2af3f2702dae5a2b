"""Knowledge-guided conditional GAN for unseen-category image generation.

A single weight-shared generator is trained with a category-dependent
loss: seen categories get the hinge adversarial objective plus a semantic
knowledge term, unseen categories the knowledge term alone. Everything
runs at desk scale on a procedurally generated flower dataset, with
per-category Frechet evaluation and a four-cell ablation harness.
"""

from .autodiff import Tensor, backward, no_grad
from .config import ExperimentConfig
from .errors import ConfigError, ContractError, DimensionError, NumericalAbort
from .evaluation import FidReport, GaussianStats, frechet_distance
from .gan import GanModel, MetricLog, TrainConfig
from .regressor import RegressorModel
from .semantics import OneHot, SemanticEmbedding
from .synthdata import CategorySpec, Dataset, Sample, SplitPlan

__version__ = "0.1.0"

__all__ = [
    "CategorySpec",
    "ConfigError",
    "ContractError",
    "Dataset",
    "DimensionError",
    "ExperimentConfig",
    "FidReport",
    "GanModel",
    "GaussianStats",
    "MetricLog",
    "NumericalAbort",
    "OneHot",
    "RegressorModel",
    "Sample",
    "SemanticEmbedding",
    "SplitPlan",
    "Tensor",
    "TrainConfig",
    "backward",
    "frechet_distance",
    "no_grad",
]
