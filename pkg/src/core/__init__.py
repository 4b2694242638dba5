"""Cross-cutting pieces for graph-kalman: errors, shared enums, seeding and run configuration."""

from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    EStepError,
    GraphError,
    GraphKalmanError,
    NumericalError,
    SingularCovarianceError,
    TapeError,
    TrainingAborted,
)
from .models import DynamicsKind, GateMode, Operator, Task, TransferMode, TransitionMode, parse_enum, to_plain
from .seeding import derive_seed, seed_sequence, substream

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "DivergenceError",
    "DynamicsKind",
    "EStepError",
    "GateMode",
    "GraphError",
    "GraphKalmanError",
    "NumericalError",
    "Operator",
    "SingularCovarianceError",
    "Task",
    "TapeError",
    "TrainingAborted",
    "TransferMode",
    "TransitionMode",
    "derive_seed",
    "parse_enum",
    "seed_sequence",
    "substream",
    "to_plain",
]
