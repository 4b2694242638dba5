"""Custom exception hierarchy for graph-kalman."""

from __future__ import annotations

from typing import Sequence


class GraphKalmanError(Exception):
    """Base error type."""


class ConfigError(GraphKalmanError):
    pass


class DataError(GraphKalmanError):
    pass


class GraphError(DataError):
    """Raised for malformed or unusable graphs."""

    def __init__(self, message: str, edge: tuple | None = None) -> None:
        if edge is not None:
            message = f"{message}: edge {edge}"
        super().__init__(message)
        self.edge = edge


class DimensionError(DataError, ValueError):
    pass


class NumericalError(GraphKalmanError):
    pass


class SingularCovarianceError(NumericalError):
    """Raised when a covariance cannot be inverted even after jitter."""

    def __init__(self, time_index: int, detail: str = "") -> None:
        message = f"singular predicted covariance at t={time_index}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.time_index = time_index


class EStepError(NumericalError):
    def __init__(self, iteration: int, cause: Exception) -> None:
        super().__init__(f"E-step failed at iteration {iteration}: {cause}")
        self.iteration = iteration


class DivergenceError(NumericalError):
    def __init__(self, message: str, trace: Sequence[float]) -> None:
        super().__init__(message)
        self.trace = list(trace)


class TrainingAborted(NumericalError):
    """Raised when a training loss turns non-finite."""

    def __init__(self, batch_index: int, epoch: int, curves: dict | None = None) -> None:
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}")
        self.batch_index = batch_index
        self.epoch = epoch
        self.curves = curves or {}
        self.report = None


class TapeError(GraphKalmanError, RuntimeError):
    pass
