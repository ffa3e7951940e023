from .model import ModelConfig, Parameters, forward, grl_backward, init_parameters, loss_and_grad, parameter_count
from .training import (
    EvalResult,
    TrainConfig,
    TrainResult,
    evaluate,
    few_shot_adapt,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "ModelConfig",
    "Parameters",
    "TrainConfig",
    "TrainResult",
    "EvalResult",
    "forward",
    "grl_backward",
    "init_parameters",
    "loss_and_grad",
    "parameter_count",
    "train",
    "few_shot_adapt",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
]
