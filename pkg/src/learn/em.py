"""Expectation-maximization for the graph state-space model."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff import Adam, Tape, Tensor, backward
from ..core.errors import EStepError, GraphKalmanError, NumericalError
from ..core.models import Operator, TransitionMode, parse_enum
from ..graph import Graph, GraphFilter
from ..kalman import kalman_filter, kalman_smoother
from ..ssm.model import StateSpaceModel
from .likelihood import (
    SufficientStats,
    expected_nll_tensor,
    filter_basis,
    model_reduced_incidence,
    sigma2_closed_form,
    sufficient_stats,
)

LOGGER = logging.getLogger(__name__)

MAX_BACKTRACKS = 40
SIGMA2_FLOOR = 1e-10


@dataclass
class MStepConfig:
    inner_steps: int = 25
    step_size: float = 1e-2
    optimizer: str = "gradient"

    def __post_init__(self) -> None:
        if self.optimizer not in ("gradient", "adam"):
            raise ValueError(f"mstep optimizer must be 'gradient' or 'adam', got {self.optimizer!r}")
        if self.inner_steps < 0 or self.step_size <= 0:
            raise ValueError("mstep needs inner_steps >= 0 and step_size > 0")


@dataclass
class EMConfig:
    max_iters: int = 50
    rel_tol: float = 1e-6
    mstep: MStepConfig = field(default_factory=MStepConfig)
    sigma0_2: float = 1.0
    alpha_floor: float = 1e-4
    filter_order: int = 2
    c: float = 0.1
    transition_mode: TransitionMode = TransitionMode.EULER
    dt: float = 1.0
    operator: Operator = Operator.LAPLACIAN
    filter_operator: Operator = Operator.LAPLACIAN

    def __post_init__(self) -> None:
        if isinstance(self.mstep, dict):
            self.mstep = MStepConfig(**self.mstep)
        self.transition_mode = parse_enum(TransitionMode, self.transition_mode, "transition_mode")
        self.operator = parse_enum(Operator, self.operator, "operator")
        self.filter_operator = parse_enum(Operator, self.filter_operator, "filter_operator")
        if self.alpha_floor <= 0:
            raise ValueError(f"alpha_floor must be > 0, got {self.alpha_floor}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True, eq=False)
class FitResult:
    model: StateSpaceModel
    nll_trace: list[float]
    converged: bool
    states: list[np.ndarray] | None = None


def as_sequences(observations, inputs=None) -> tuple[list[np.ndarray], list[np.ndarray | None]]:
    """Normalize one (N_o, T) matrix or a list of them, with matching inputs."""
    if isinstance(observations, np.ndarray) and observations.ndim == 2:
        observations = [observations]
    seqs = [np.asarray(y, dtype=float) for y in observations]
    if inputs is None:
        return seqs, [None] * len(seqs)
    if isinstance(inputs, np.ndarray) and inputs.ndim == 2:
        inputs = [inputs]
    inputs = [np.asarray(r, dtype=float) for r in inputs]
    if len(inputs) != len(seqs):
        raise ValueError(f"{len(seqs)} observation sequences but {len(inputs)} input sequences")
    return seqs, inputs


def increment_variance(seqs: Sequence[np.ndarray]) -> float:
    diffs = np.concatenate([np.diff(y, axis=1).reshape(-1) for y in seqs])
    return float(max(np.var(diffs), SIGMA2_FLOOR))


def initial_model(
    graph: Graph,
    seqs: Sequence[np.ndarray],
    config: EMConfig,
    mask: Sequence[int] | None = None,
    input_filter: GraphFilter | None = None,
) -> StateSpaceModel:
    """h = [1, 0, ...], alpha = 0.1, sigma2 = sample variance of observation increments."""
    return StateSpaceModel(
        graph=graph,
        c=config.c,
        alpha=np.full(graph.m, max(0.1, config.alpha_floor)),
        obs_filter=GraphFilter.identity(config.filter_order, config.filter_operator),
        sigma2=increment_variance(seqs),
        sigma0_2=config.sigma0_2,
        mask=None if mask is None else tuple(mask),
        transition_mode=config.transition_mode,
        dt=config.dt,
        operator=config.operator,
        input_filter=input_filter,
    )


def e_step(model: StateSpaceModel, seqs, inputs) -> tuple[SufficientStats, float, list[np.ndarray]]:
    """Filter and smooth every sequence; returns summed statistics, observed NLL and smoothed means."""
    total: SufficientStats | None = None
    observed = 0.0
    means = []
    for y, r in zip(seqs, inputs):
        trace = kalman_filter(model, y, r)
        smoothed = kalman_smoother(model, trace)
        stats = sufficient_stats(smoothed, y, r)
        total = stats if total is None else total + stats
        observed += trace.nll()
        means.append(smoothed.means.T)
    return total, observed, means


class MStepObjective:
    """Expected NLL in (h, alpha) at fixed sigma2 and transition."""

    def __init__(self, model: StateSpaceModel, stats: SufficientStats) -> None:
        self.model = model
        self.stats = stats
        self.basis = filter_basis(model)
        self.reduced = model_reduced_incidence(model)
        self.transition = model.transition_matrix()
        self.input_matrix = model.input_matrix()

    def value_and_grad(self, h: np.ndarray, alpha: np.ndarray, sigma2: float, need_grad: bool = True):
        h_t = Tensor(h, requires_grad=need_grad)
        alpha_t = Tensor(alpha, requires_grad=need_grad)
        if not need_grad:
            return self._evaluate(h_t, alpha_t, sigma2).item(), None
        with Tape() as tape:
            out = self._evaluate(h_t, alpha_t, sigma2)
        grads = backward(tape, out, [h_t, alpha_t])
        return out.item(), grads

    def _evaluate(self, h: Tensor, alpha: Tensor, sigma2: float) -> Tensor:
        return expected_nll_tensor(
            self.stats,
            h=h,
            alpha=alpha,
            sigma2=Tensor(sigma2),
            transition=self.transition,
            basis=self.basis,
            reduced=self.reduced,
            sigma0_2=self.model.sigma0_2,
            input_matrix=self.input_matrix,
        )


def _gradient_steps(objective: MStepObjective, h, alpha, sigma2, config: EMConfig):
    step = config.mstep.step_size
    value, (g_h, g_a) = objective.value_and_grad(h, alpha, sigma2)
    for inner in range(config.mstep.inner_steps):
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            cand_h = h - step * g_h
            cand_a = np.maximum(alpha - step * g_a, config.alpha_floor)
            cand_value, _ = objective.value_and_grad(cand_h, cand_a, sigma2, need_grad=False)
            decrease = np.sum(g_h * (h - cand_h)) + np.sum(g_a * (alpha - cand_a))
            if np.isfinite(cand_value) and cand_value <= value - 1e-4 * decrease:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            LOGGER.debug("M-step backtracking stalled at inner step %s", inner)
            break
        h, alpha = cand_h, cand_a
        value, (g_h, g_a) = objective.value_and_grad(h, alpha, sigma2)
        step *= 2.0
    return h, alpha, value


def _adam_steps(objective: MStepObjective, h, alpha, sigma2, config: EMConfig):
    params = [Tensor(h), Tensor(alpha)]
    opt = Adam(params, lr=config.mstep.step_size)
    value, grads = objective.value_and_grad(h, alpha, sigma2)
    best = (h, alpha, value)
    for _ in range(config.mstep.inner_steps):
        opt.step(grads)
        params[1].value = np.maximum(params[1].value, config.alpha_floor)
        value, grads = objective.value_and_grad(params[0].value, params[1].value, sigma2)
        if np.isfinite(value) and value < best[2]:
            best = (params[0].value.copy(), params[1].value.copy(), value)
    return best


def m_step(model: StateSpaceModel, stats: SufficientStats, config: EMConfig) -> StateSpaceModel:
    """Gradient steps on (h, alpha), then the closed-form sigma2."""
    objective = MStepObjective(model, stats)
    h = np.asarray(model.obs_filter.coeffs, dtype=float)
    alpha = np.maximum(model.alpha, config.alpha_floor)
    run = _adam_steps if config.mstep.optimizer == "adam" else _gradient_steps
    h, alpha, _ = run(objective, h, alpha, model.sigma2, config)

    obs = np.tensordot(h, objective.basis, axes=1)
    sigma2 = max(sigma2_closed_form(stats, obs), SIGMA2_FLOOR)
    return model.replace(obs_filter=model.obs_filter.with_coeffs(h), alpha=alpha, sigma2=sigma2)


def em_fit(
    observations,
    graph: Graph,
    config: EMConfig | None = None,
    init: StateSpaceModel | None = None,
    inputs=None,
    mask: Sequence[int] | None = None,
) -> FitResult:
    """Alternate Kalman smoothing (E-step) with expected-NLL minimization (M-step).

    ``observations`` is one (N_o, T) matrix or a list of them; statistics of
    several sequences are accumulated additively. The NLL trace holds the
    observed-data NLL of the model entering each iteration plus the final model.
    """
    config = config or EMConfig()
    seqs, inputs = as_sequences(observations, inputs)
    if any(y.shape[1] < 2 for y in seqs):
        raise ValueError("em_fit needs T >= 2")
    graph.require_connected()
    model = init or initial_model(graph, seqs, config, mask)
    if init is not None and init.sigma0_2 != config.sigma0_2:
        model = model.replace(sigma0_2=config.sigma0_2)

    trace: list[float] = []
    converged = False
    means: list[np.ndarray] = []
    for iteration in range(config.max_iters + 1):
        try:
            stats, observed, means = e_step(model, seqs, inputs)
        except (GraphKalmanError, np.linalg.LinAlgError) as exc:
            raise EStepError(iteration, exc) from exc
        if not np.isfinite(observed):
            raise EStepError(iteration, NumericalError("non-finite observed-data NLL"))
        trace.append(observed)
        LOGGER.info("EM iteration %s: observed NLL %.6f (sigma2=%.4g)", iteration, observed, model.sigma2)
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) <= config.rel_tol * max(1.0, abs(trace[-2])):
            converged = True
            break
        if iteration == config.max_iters:
            break
        model = m_step(model, stats, config)
    return FitResult(model=model, nll_trace=trace, converged=converged, states=means)
