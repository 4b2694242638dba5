"""Direct first-order maximum-likelihood baseline.

The state block is solved exactly by the smoother means (the minimizer of the
complete-data NLL in the states); the parameter block takes backtracked
projected gradient steps on (h, alpha, sigma2, c) whose gradient is the
expected-NLL gradient at the current posterior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tape, Tensor, backward
from ..core.errors import DivergenceError, GraphKalmanError
from ..graph import Graph
from ..kalman import kalman_filter
from ..ssm.model import StateSpaceModel
from .em import EMConfig, FitResult, as_sequences, e_step, initial_model
from .likelihood import (
    SufficientStats,
    expected_nll_tensor,
    filter_basis,
    model_reduced_incidence,
    transition_tensor,
)

LOGGER = logging.getLogger(__name__)

DIVERGENCE_PATIENCE = 10


@dataclass
class GradConfig(EMConfig):
    step_size: float = 1e-3
    max_backtracks: int = 30
    learn_c: bool = True
    sigma2_floor: float = 1e-8


def parameter_gradient(model: StateSpaceModel, stats: SufficientStats, learn_c: bool = True) -> dict[str, np.ndarray]:
    """Gradient of the expected NLL in (h, alpha, sigma2, c) at fixed posterior statistics."""
    h = Tensor(model.obs_filter.coeffs, requires_grad=True)
    alpha = Tensor(model.alpha, requires_grad=True)
    sigma2 = Tensor(model.sigma2, requires_grad=True)
    c = Tensor(model.c, requires_grad=learn_c)
    with Tape() as tape:
        out = expected_nll_tensor(
            stats,
            h=h,
            alpha=alpha,
            sigma2=sigma2,
            transition=transition_tensor(model, c),
            basis=filter_basis(model),
            reduced=model_reduced_incidence(model),
            sigma0_2=model.sigma0_2,
            input_matrix=model.input_matrix(),
        )
    g_h, g_a, g_s, g_c = backward(tape, out, [h, alpha, sigma2, c])
    return {"h": g_h, "alpha": g_a, "sigma2": g_s, "c": g_c if learn_c else np.zeros(())}


def _observed(model: StateSpaceModel, seqs, inputs) -> float:
    try:
        return float(sum(kalman_filter(model, y, r).nll() for y, r in zip(seqs, inputs)))
    except (GraphKalmanError, np.linalg.LinAlgError, ValueError) as exc:
        LOGGER.debug("trial point rejected: %s", exc)
        return float("inf")


def _step(model: StateSpaceModel, grads: dict, step: float, config: GradConfig) -> StateSpaceModel:
    h = np.asarray(model.obs_filter.coeffs) - step * grads["h"]
    alpha = np.maximum(model.alpha - step * grads["alpha"], config.alpha_floor)
    sigma2 = max(model.sigma2 - step * float(grads["sigma2"]), config.sigma2_floor)
    c = max(model.c - step * float(grads["c"]), 0.0)
    return model.replace(obs_filter=model.obs_filter.with_coeffs(h), alpha=alpha, sigma2=sigma2, c=c)


def grad_fit(
    observations,
    graph: Graph,
    config: GradConfig | None = None,
    init: StateSpaceModel | None = None,
    inputs=None,
    mask=None,
) -> FitResult:
    """Joint first-order minimization of the complete-data NLL over parameters and states."""
    config = config or GradConfig()
    seqs, inputs = as_sequences(observations, inputs)
    if any(y.shape[1] < 2 for y in seqs):
        raise ValueError("grad_fit needs T >= 2")
    graph.require_connected()
    model = init or initial_model(graph, seqs, config, mask)

    stats, current, states = e_step(model, seqs, inputs)
    trace = [current]
    step = config.step_size
    non_decreasing = 0
    converged = False
    for iteration in range(config.max_iters):
        grads = parameter_gradient(model, stats, config.learn_c)
        norm_sq = sum(float(np.sum(g * g)) for g in grads.values())
        if norm_sq == 0.0:
            converged = True
            break

        candidate, value = model, float("inf")
        for _ in range(config.max_backtracks):
            candidate = _step(model, grads, step, config)
            value = _observed(candidate, seqs, inputs)
            if value <= current - 1e-4 * step * norm_sq:
                break
            step *= 0.5
        else:
            LOGGER.debug("grad_fit backtracking exhausted at iteration %s", iteration)
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite NLL at grad_fit iteration {iteration}", trace)

        non_decreasing = non_decreasing + 1 if value >= current else 0
        if non_decreasing >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"NLL failed to decrease for {DIVERGENCE_PATIENCE} consecutive accepted steps", trace + [value]
            )

        model = candidate
        stats, value, states = e_step(model, seqs, inputs)
        trace.append(value)
        LOGGER.info("grad_fit iteration %s: observed NLL %.6f (step %.3g)", iteration, value, step)
        previous, current = current, value
        step *= 2.0
        if abs(previous - current) <= config.rel_tol * max(1.0, abs(previous)):
            converged = True
            break
    return FitResult(model=model, nll_trace=trace, converged=converged, states=states)


def state_gradient(
    model: StateSpaceModel, states: np.ndarray, observations: np.ndarray, inputs: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the complete-data NLL in unconstrained state coordinates.

    States are parameterized by x_0 and z_t = U^T (x_t - A x_{t-1} - G r_t), with U an
    orthonormal basis of range(Q); returns (d/dx_0 (N,), d/dz (T, rank)).
    """
    x = np.asarray(states, dtype=float)
    y = np.asarray(observations, dtype=float)
    system = model.linear_system()
    a, h = system.transition, system.observation
    reduced = model_reduced_incidence(model)
    basis = reduced.basis
    precision = reduced.reduced_pinv(model.alpha**2)
    steps = y.shape[1]

    drift = a @ x[:, :-1]
    if inputs is not None:
        drift = drift + system.input_matrix @ np.asarray(inputs, dtype=float)
    z = basis.T @ (x[:, 1:] - drift)

    direct = np.empty_like(x)
    direct[:, 0] = x[:, 0] / model.sigma0_2
    direct[:, 1:] = -h.T @ (y - h @ x[:, 1:]) / model.sigma2
    adjoint = np.empty_like(x)
    adjoint[:, steps] = direct[:, steps]
    for t in range(steps - 1, -1, -1):
        adjoint[:, t] = direct[:, t] + a.T @ adjoint[:, t + 1]
    grad_z = (basis.T @ adjoint[:, 1:] + precision @ z).T
    return adjoint[:, 0], grad_z
