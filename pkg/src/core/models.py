"""Shared enumerations and record helpers for graph-kalman."""

from __future__ import annotations

import dataclasses
from enum import Enum

import numpy as np


class Operator(str, Enum):
    LAPLACIAN = "laplacian"
    NORMALIZED_LAPLACIAN = "normalized-laplacian"
    SCALED_LAPLACIAN = "scaled-laplacian"
    EDGE_LAPLACIAN = "edge-laplacian"

    @property
    def acts_on_edges(self) -> bool:
        return self is Operator.EDGE_LAPLACIAN


class TransitionMode(str, Enum):
    LITERAL = "literal"
    EULER = "euler"


class DynamicsKind(str, Enum):
    SSM = "ssm"
    LINEAR_BENCHMARK = "linear-benchmark"
    NONLINEAR_BENCHMARK = "nonlinear-benchmark"


class GateMode(str, Enum):
    SIGMOID = "sigmoid-gate"
    RELU = "relu-gate"


class Task(str, Enum):
    TRACKING = "tracking"
    FORECASTING = "forecasting"
    IMPUTATION = "imputation"
    INPUT_DRIVEN = "input-driven"


class TransferMode(str, Enum):
    NONE = "none"
    ZERO_UZ = "zero-uz"
    FINE_TUNE = "fine-tune"


def parse_enum(enum_cls: type[Enum], value: object, field: str) -> Enum:
    """Coerce a config value into an enum member, raising ValueError with the allowed values."""
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).lower())
    except ValueError as exc:
        allowed = ", ".join(member.value for member in enum_cls)
        raise ValueError(f"{field} must be one of [{allowed}], got {value!r}") from exc


def to_plain(value: object) -> object:
    """Dataclasses, enums, tuples and numpy scalars as JSON-ready builtins."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        fields = [f.name for f in dataclasses.fields(value) if not f.name.startswith("_")]
        return {name: to_plain(getattr(value, name)) for name in fields}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value
