"""GKNet: a learned graph-filter Kalman tracker."""

from .checkpoint import (
    checkpoint_extra,
    load_checkpoint,
    load_state_arrays,
    named_tensors,
    save_checkpoint,
    state_arrays,
)
from .inference import InferenceRNN, StepParams, hidden_size, pack, unpack
from .kalman_module import KalmanModule, default_edge_input, edge_uncertainty, km_correct, km_predict, poly_apply
from .layers import GCNN, GraphConvLayer
from .model import TASK_DEFAULTS, ForwardTrace, GKNetConfig, GKNetModel, apply_transfer
from .train import LossCurves, TrainConfig, TrainResult, WindowSet, evaluate_loss, train, train_step

__all__ = [
    "ForwardTrace",
    "GCNN",
    "GKNetConfig",
    "GKNetModel",
    "GraphConvLayer",
    "InferenceRNN",
    "KalmanModule",
    "LossCurves",
    "StepParams",
    "TASK_DEFAULTS",
    "TrainConfig",
    "TrainResult",
    "WindowSet",
    "apply_transfer",
    "checkpoint_extra",
    "default_edge_input",
    "edge_uncertainty",
    "evaluate_loss",
    "hidden_size",
    "km_correct",
    "km_predict",
    "load_checkpoint",
    "load_state_arrays",
    "named_tensors",
    "pack",
    "poly_apply",
    "save_checkpoint",
    "state_arrays",
    "train",
    "train_step",
    "unpack",
]
