from .checkpoint import load, save
from .data import Example, make_examples
from .network import ScoringModel, closed_form_param_count, collate
from .training import (
    TrainConfig,
    TrainResult,
    adapt,
    gradient,
    loss_and_gradient,
    mse_loss,
    train,
    train_multitask,
)

__all__ = [
    "Example",
    "ScoringModel",
    "TrainConfig",
    "TrainResult",
    "adapt",
    "closed_form_param_count",
    "collate",
    "gradient",
    "load",
    "loss_and_gradient",
    "make_examples",
    "mse_loss",
    "save",
    "train",
    "train_multitask",
]
