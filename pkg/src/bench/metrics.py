"""Evaluation metrics."""

from __future__ import annotations

import numpy as np

from ..core.errors import DataError, DimensionError

MSE_DB_FLOOR = -300.0


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} and {b.shape} do not agree")


def nrmse(predicted, target, mask=None) -> float:
    """||(predicted - target) * mask||_F / ||target * mask||_F."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    _check_shapes(predicted, target)
    weight = np.ones_like(target) if mask is None else np.broadcast_to(np.asarray(mask, dtype=float), target.shape)
    denom = np.linalg.norm((target * weight).ravel())
    if denom == 0.0:
        raise DataError("nRMSE is undefined for a zero target norm")
    return float(np.linalg.norm(((predicted - target) * weight).ravel()) / denom)


def mse(estimated, truth) -> float:
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    _check_shapes(estimated, truth)
    return float(np.mean(np.square(estimated - truth)))


def mse_db(estimated, truth) -> float:
    """10 log10 of the mean squared error; an exact match reports -300."""
    value = mse(estimated, truth)
    if value <= 0.0:
        return MSE_DB_FLOOR
    return max(10.0 * float(np.log10(value)), MSE_DB_FLOOR)
