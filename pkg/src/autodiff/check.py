"""Central finite-difference gradient checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_index: tuple
    analytic: np.ndarray
    numeric: np.ndarray

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def _compare(analytic: np.ndarray, numeric: np.ndarray, shape: tuple) -> GradCheckResult:
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), 1e-12)
    errors = np.abs(analytic - numeric) / scale
    worst = int(np.argmax(errors)) if errors.size else 0
    index = np.unravel_index(worst, shape) if errors.size else ()
    return GradCheckResult(
        max_rel_error=float(errors.reshape(-1)[worst]) if errors.size else 0.0,
        worst_index=tuple(int(i) for i in index),
        analytic=analytic.reshape(shape),
        numeric=numeric.reshape(shape),
    )


def _central_differences(evaluate: Callable[[], float], flat: np.ndarray, epsilon: float) -> np.ndarray:
    numeric = np.empty(flat.size)
    for i in range(flat.size):
        original = flat[i]
        step = epsilon * max(1.0, abs(original))
        flat[i] = original + step
        plus = evaluate()
        flat[i] = original - step
        minus = evaluate()
        flat[i] = original
        numeric[i] = (plus - minus) / (2.0 * step)
    return numeric


def gradient_check(
    fn: Callable[[Tensor], Tensor],
    point: np.ndarray,
    epsilon: float = 1e-5,
    nudge: float = 0.0,
    seed: int = 0,
) -> GradCheckResult:
    """Compare reverse-mode and central-difference gradients of scalar ``fn`` at ``point``.

    The step for coordinate i is ``epsilon * max(1, |x_i|)``. A positive ``nudge``
    shifts the point by seeded Gaussian noise of that size to move off kinks.
    Relative error is normwise: |ad_i - fd_i| / max(|ad|_inf, |fd|_inf, 1e-12).
    """
    point = np.array(point, dtype=float)
    if nudge > 0:
        point = point + nudge * np.random.default_rng(seed).standard_normal(point.shape)

    leaf = Tensor(point, requires_grad=True)
    with Tape() as tape:
        out = fn(leaf)
    (analytic,) = backward(tape, out, [leaf])

    trial = Tensor(point.copy())
    flat = trial.value.reshape(-1)
    numeric = _central_differences(lambda: fn(trial).item(), flat, epsilon)
    result = _compare(np.asarray(analytic).reshape(-1), numeric, point.shape)
    LOGGER.debug("gradient check: max rel error %.3e at %s", result.max_rel_error, result.worst_index)
    return result


def check_parameters(
    loss: Callable[[], Tensor],
    params: Sequence[Tensor],
    epsilon: float = 1e-5,
    nudge: float = 0.0,
    seed: int = 0,
) -> dict[int, GradCheckResult]:
    """Gradient check of ``loss()`` with respect to each tensor in ``params``, keyed by position.

    ``loss`` must read the parameter tensors' current values on every call. A positive
    ``nudge`` first shifts every tensor in place by seeded Gaussian noise of that size, so
    zero-initialized biases do not leave a ReLU exactly at its kink.
    """
    if nudge > 0:
        rng = np.random.default_rng(seed)
        for tensor in params:
            tensor.value = tensor.value + nudge * rng.standard_normal(tensor.shape)
    with Tape() as tape:
        out = loss()
    analytic = backward(tape, out, list(params))

    results: dict[int, GradCheckResult] = {}
    for position, (tensor, grad) in enumerate(zip(params, analytic)):
        flat = tensor.value.reshape(-1)
        numeric = _central_differences(lambda: loss().item(), flat, epsilon)
        results[position] = _compare(np.asarray(grad).reshape(-1), numeric, tensor.shape)
    return results
