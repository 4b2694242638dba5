"""Complete-data and expected negative log-likelihoods of the graph SSM.

With Q = B diag(alpha^2) B^T (rank r = rank B) and eps_t = x_t - A x_{t-1} - G r_t:

    L = (N_o T / 2) log sigma2 + 1/(2 sigma2) sum_t |y_t - H x_t|^2
      + (T / 2) log pdet(Q) + 1/2 sum_t eps_t^T Q^+ eps_t
      + (N / 2) log sigma0_2 + 1/(2 sigma0_2) |x_0|^2

The expected version replaces the state products by smoothed second moments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops
from ..core.errors import DimensionError, GraphError
from ..core.models import TransitionMode
from ..graph import ReducedIncidence, reduced_incidence
from ..kalman import SmootherTrace
from ..ssm.model import StateSpaceModel

LOGGER = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Posterior second moments summed over time (and over trajectories)."""

    s11: np.ndarray
    s10: np.ndarray
    s00: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    first: np.ndarray
    steps: int
    trajectories: int = 1
    sxr: np.ndarray | None = None
    s0r: np.ndarray | None = None
    srr: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.s11.shape[0]

    @property
    def n_obs(self) -> int:
        return self.syy.shape[0]

    @property
    def has_inputs(self) -> bool:
        return self.srr is not None

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if self.has_inputs != other.has_inputs:
            raise DimensionError("cannot combine statistics with and without inputs")

        def plus(a, b):
            return None if a is None else a + b

        return SufficientStats(
            s11=self.s11 + other.s11,
            s10=self.s10 + other.s10,
            s00=self.s00 + other.s00,
            syy=self.syy + other.syy,
            sxy=self.sxy + other.sxy,
            first=self.first + other.first,
            steps=self.steps + other.steps,
            trajectories=self.trajectories + other.trajectories,
            sxr=plus(self.sxr, other.sxr),
            s0r=plus(self.s0r, other.s0r),
            srr=plus(self.srr, other.srr),
        )


def _input_stats(means: np.ndarray, inputs: np.ndarray | None):
    if inputs is None:
        return None, None, None
    r = np.asarray(inputs, dtype=float).T
    return means[1:].T @ r, means[:-1].T @ r, r.T @ r


def sufficient_stats(
    smoothed: SmootherTrace, observations: np.ndarray, inputs: np.ndarray | None = None
) -> SufficientStats:
    means, covs = smoothed.means, smoothed.covs
    y = np.asarray(observations, dtype=float).T
    second = np.einsum("ti,tj->tij", means, means) + covs
    sxr, s0r, srr = _input_stats(means, inputs)
    return SufficientStats(
        s11=second[1:].sum(axis=0),
        s10=np.einsum("ti,tj->ij", means[1:], means[:-1]) + smoothed.lag_covs.sum(axis=0),
        s00=second[:-1].sum(axis=0),
        syy=y.T @ y,
        sxy=means[1:].T @ y,
        first=second[0],
        steps=y.shape[0],
        sxr=sxr,
        s0r=s0r,
        srr=srr,
    )


def point_stats(states: np.ndarray, observations: np.ndarray, inputs: np.ndarray | None = None) -> SufficientStats:
    """Statistics of a fully known state sequence (zero posterior variance)."""
    x = np.asarray(states, dtype=float).T
    y = np.asarray(observations, dtype=float).T
    if x.shape[0] != y.shape[0] + 1:
        raise DimensionError(f"need T+1 states for T observations, got {x.shape[0]} and {y.shape[0]}")
    sxr, s0r, srr = _input_stats(x, inputs)
    return SufficientStats(
        s11=x[1:].T @ x[1:],
        s10=x[1:].T @ x[:-1],
        s00=x[:-1].T @ x[:-1],
        syy=y.T @ y,
        sxy=x[1:].T @ y,
        first=np.outer(x[0], x[0]),
        steps=y.shape[0],
        sxr=sxr,
        s0r=s0r,
        srr=srr,
    )


def filter_basis(model: StateSpaceModel) -> np.ndarray:
    """(K+1, N_o, N) stack with H(h) = sum_k h_k basis[k]."""
    order = model.obs_filter.order
    unit = np.eye(order + 1)
    return np.stack(
        [model.obs_filter.with_coeffs(unit[k]).matrix(model.graph)[model.observed] for k in range(order + 1)]
    )


def observation_tensor(basis: np.ndarray, h: Tensor) -> Tensor:
    k, n_obs, n = basis.shape
    flat = basis.reshape(k, n_obs * n).T
    return ops.reshape(ops.matvec(flat, h), (n_obs, n))


def transition_tensor(model: StateSpaceModel, c: Tensor) -> Tensor:
    """A(c) as a tensor so the diffusivity can be learned."""
    lap = model.laplacian()
    scaled = ops.scale(lap, c)
    if model.transition_mode is TransitionMode.LITERAL:
        return ops.scale(scaled, -1.0)
    return ops.sub(np.eye(model.n), ops.scale(scaled, model.dt))


def _innovation_cov(stats: SufficientStats, a, g: np.ndarray | None):
    """sum_t E[eps_t eps_t^T] for eps_t = x_t - A x_{t-1} - G r_t."""
    a_t = ops.transpose(a)
    w = ops.sub(
        ops.add(ops.sub(stats.s11, ops.matmul(a, stats.s10.T)), ops.matmul(ops.matmul(a, stats.s00), a_t)),
        ops.matmul(stats.s10, a_t),
    )
    if stats.has_inputs and g is not None:
        cross = ops.sub(stats.sxr, ops.matmul(a, stats.s0r)) @ g.T
        w = ops.add(ops.sub(ops.sub(w, cross), ops.transpose(cross)), g @ stats.srr @ g.T)
    return w


def expected_nll_tensor(
    stats: SufficientStats,
    *,
    h: Tensor,
    alpha: Tensor,
    sigma2: Tensor,
    transition,
    basis: np.ndarray,
    reduced: ReducedIncidence,
    sigma0_2: float,
    input_matrix: np.ndarray | None = None,
    constants: bool = False,
) -> Tensor:
    """Expected complete-data NLL as a differentiable function of (h, alpha, sigma2, A)."""
    obs = observation_tensor(basis, h)
    cross = ops.sum_all(ops.hadamard(obs, stats.sxy.T))
    quad = ops.sum_all(ops.hadamard(ops.matmul(obs, stats.s11), obs))
    fidelity = ops.add(ops.sub(quad, ops.scale(cross, 2.0)), float(np.trace(stats.syy)))
    log_sigma2 = ops.log(sigma2)
    data_term = ops.add(
        ops.scale(log_sigma2, 0.5 * stats.n_obs * stats.steps),
        ops.scale(ops.hadamard(fidelity, ops.exp(ops.scale(log_sigma2, -1.0))), 0.5),
    )

    variance = ops.hadamard(alpha, alpha)
    w = _innovation_cov(stats, ops.as_tensor(transition), input_matrix)
    transition_term = ops.add(
        ops.scale(ops.log_pdet(variance, reduced), 0.5 * stats.steps),
        ops.scale(ops.precision_trace(w, variance, reduced), 0.5),
    )

    init = 0.5 * stats.trajectories * stats.n * np.log(sigma0_2) + 0.5 * np.trace(stats.first) / sigma0_2
    if constants:
        init += 0.5 * LOG_2PI * (stats.steps * (stats.n_obs + reduced.rank) + stats.trajectories * stats.n)
    return ops.add(ops.add(data_term, transition_term), init)


def _validate(model: StateSpaceModel, alpha_floor: float) -> None:
    if model.graph.m == 0:
        raise GraphError("Q = B diag(alpha^2) B^T has rank 0 on a graph without edges")
    if model.sigma2 <= 0:
        raise ValueError(f"sigma2 must be > 0, got {model.sigma2}")
    if model.sigma0_2 <= 0:
        raise ValueError(f"sigma0_2 must be > 0, got {model.sigma0_2}")
    if np.any(model.alpha < alpha_floor) or np.any(model.alpha <= 0):
        raise ValueError(f"alpha entries must be >= alpha_floor={alpha_floor} and > 0")


def model_reduced_incidence(model: StateSpaceModel) -> ReducedIncidence:
    return model.cached("reduced", lambda: reduced_incidence(model.graph, model.operator))


def expected_nll(
    model: StateSpaceModel,
    stats: SufficientStats,
    observations: np.ndarray | None = None,
    constants: bool = False,
    alpha_floor: float = 0.0,
) -> float:
    """Expected NLL at ``model``; ``observations``, when given, must match the statistics."""
    _validate(model, alpha_floor)
    if observations is not None:
        observations = np.asarray(observations)
        if observations.shape[0] != stats.n_obs or observations.shape[1] > stats.steps:
            raise DimensionError(
                f"observations of shape {observations.shape} do not match statistics "
                f"({stats.n_obs} outputs, {stats.steps} steps)"
            )
    value = expected_nll_tensor(
        stats,
        h=Tensor(model.obs_filter.coeffs),
        alpha=Tensor(model.alpha),
        sigma2=Tensor(model.sigma2),
        transition=model.transition_matrix(),
        basis=filter_basis(model),
        reduced=model_reduced_incidence(model),
        sigma0_2=model.sigma0_2,
        input_matrix=model.input_matrix(),
        constants=constants,
    )
    return value.item()


def nll(
    model: StateSpaceModel,
    states: np.ndarray,
    observations: np.ndarray,
    inputs: np.ndarray | None = None,
    constants: bool = False,
    alpha_floor: float = 0.0,
) -> float:
    """Complete-data NLL of a state sequence; with ``constants`` it is -log p(x_0..x_T, y_1..y_T)."""
    if (inputs is None) != (model.input_filter is None):
        raise DimensionError("inputs must be given exactly when the model has an input filter")
    return expected_nll(model, point_stats(states, observations, inputs), constants=constants, alpha_floor=alpha_floor)


def sigma2_closed_form(stats: SufficientStats, observation: np.ndarray) -> float:
    """Stationary point of the expected NLL in sigma2 for a fixed observation matrix H."""
    h = observation
    fidelity = np.trace(stats.syy) - 2.0 * np.trace(h @ stats.sxy) + np.trace(h @ stats.s11 @ h.T)
    return float(fidelity / (stats.n_obs * stats.steps))
