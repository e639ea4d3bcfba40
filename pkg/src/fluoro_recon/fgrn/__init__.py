"""Single-view 3D guidewire shape regressor (3D-FGRN)."""

from .io import load_model, save_model
from .losses import huber_loss, spacing_regularizer, total_loss
from .model import Architecture, FgrnModel, backward, forward, init_model
from .nadam import NadamConfig, OptimizerState, nadam_step
from .training import TrainConfig, TrainResult, predict_curve, predict_points, train

__all__ = [
    "Architecture", "FgrnModel", "NadamConfig", "OptimizerState", "TrainConfig", "TrainResult",
    "backward", "forward", "huber_loss", "init_model", "load_model", "nadam_step", "predict_curve",
    "predict_points", "save_model", "spacing_regularizer", "total_loss", "train",
]
