"""Reverse-mode differentiation over numpy arrays and constant graph operators."""

from . import ops
from .check import GradCheckResult, check_parameters, gradient_check
from .ops import BatchNormState
from .optim import Adam, clip_global_norm, global_norm
from .tensor import Tape, Tensor, as_tensor, backward, current_tape

__all__ = [
    "Adam",
    "BatchNormState",
    "GradCheckResult",
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "check_parameters",
    "clip_global_norm",
    "current_tape",
    "global_norm",
    "gradient_check",
    "ops",
]
