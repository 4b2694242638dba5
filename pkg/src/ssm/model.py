"""Graph state-space model and its linear-Gaussian view."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..core.models import Operator, TransitionMode, parse_enum
from ..graph import Graph, GraphFilter


@dataclass(frozen=True, eq=False)
class LinearGaussianSystem:
    """x_t = A x_{t-1} + G r_t + w_t, w_t ~ N(0, Q);  y_t = H x_t + v_t, v_t ~ N(0, R)."""

    transition: np.ndarray
    process_cov: np.ndarray
    observation: np.ndarray
    obs_cov: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    input_matrix: np.ndarray | None = None

    @property
    def n_state(self) -> int:
        return self.transition.shape[0]

    @property
    def n_obs(self) -> int:
        return self.observation.shape[0]

    def linear_system(self) -> "LinearGaussianSystem":
        return self


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Graph SPDE state model observed through a masked graph filter.

    x_t = A x_{t-1} [+ H_in r_t] + B diag(alpha) w_t,  y_t = M H(L) x_t + v_t,
    with x_0 ~ N(0, sigma0_2 I).
    """

    graph: Graph
    c: float
    alpha: np.ndarray
    obs_filter: GraphFilter
    sigma2: float
    sigma0_2: float = 1.0
    mask: tuple[int, ...] | None = None
    transition_mode: TransitionMode = TransitionMode.EULER
    dt: float = 1.0
    operator: Operator = Operator.LAPLACIAN
    input_filter: GraphFilter | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        alpha = np.broadcast_to(np.asarray(self.alpha, dtype=float), (self.graph.m,)).copy()
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise ValueError("alpha entries must be finite and >= 0")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "transition_mode", parse_enum(TransitionMode, self.transition_mode, "transition_mode"))
        object.__setattr__(self, "operator", parse_enum(Operator, self.operator, "operator"))
        if self.operator is Operator.EDGE_LAPLACIAN:
            raise ValueError("the state operator must act on nodes")
        if self.c < 0:
            raise ValueError(f"diffusivity c must be >= 0, got {self.c}")
        if self.sigma2 < 0 or self.sigma0_2 < 0:
            raise ValueError("noise variances must be >= 0")
        if self.mask is not None:
            mask = tuple(int(i) for i in self.mask)
            if len(set(mask)) != len(mask) or any(i < 0 or i >= self.graph.n for i in mask):
                raise ValueError(f"mask must list distinct node indices in [0, {self.graph.n})")
            object.__setattr__(self, "mask", mask)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def observed(self) -> np.ndarray:
        return np.arange(self.n) if self.mask is None else np.asarray(self.mask, dtype=int)

    @property
    def n_obs(self) -> int:
        return int(self.observed.size)

    def replace(self, **changes) -> "StateSpaceModel":
        changes.setdefault("_cache", {})
        return dataclasses.replace(self, **changes)

    def cached(self, key: str, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def laplacian(self) -> np.ndarray:
        return self.cached("laplacian", lambda: self.graph.operator(self.operator).toarray())

    def incidence(self) -> np.ndarray:
        return self.cached("incidence", lambda: self.graph.operator_incidence(self.operator).toarray())

    def transition_matrix(self) -> np.ndarray:
        return transition_matrix(self)

    def process_covariance(self) -> np.ndarray:
        b = self.incidence()
        return (b * self.alpha**2) @ b.T

    def selection_matrix(self) -> np.ndarray:
        return np.eye(self.n)[self.observed]

    def filter_matrix(self) -> np.ndarray:
        return self.obs_filter.matrix(self.graph)

    def observation_matrix(self) -> np.ndarray:
        return self.filter_matrix()[self.observed]

    def input_matrix(self) -> np.ndarray | None:
        return None if self.input_filter is None else self.input_filter.matrix(self.graph)

    def linear_system(self) -> LinearGaussianSystem:
        return LinearGaussianSystem(
            transition=self.transition_matrix(),
            process_cov=self.process_covariance(),
            observation=self.observation_matrix(),
            obs_cov=self.sigma2 * np.eye(self.n_obs),
            init_mean=np.zeros(self.n),
            init_cov=self.sigma0_2 * np.eye(self.n),
            input_matrix=self.input_matrix(),
        )


def transition_matrix(model: StateSpaceModel) -> np.ndarray:
    """Dense A: ``-c L`` (literal) or ``I - c dt L`` (euler)."""
    lap = model.laplacian()
    if model.transition_mode is TransitionMode.LITERAL:
        return -model.c * lap
    return np.eye(model.n) - model.c * model.dt * lap


def transition_for(
    lap: np.ndarray, c: float, mode: TransitionMode | str = TransitionMode.EULER, dt: float = 1.0
) -> np.ndarray:
    mode = parse_enum(TransitionMode, mode, "transition_mode")
    if mode is TransitionMode.LITERAL:
        return -c * lap
    return np.eye(lap.shape[0]) - c * dt * lap


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States x_0..x_T (N x (T+1)) and observations y_1..y_T (N_o x T)."""

    states: np.ndarray
    observations: np.ndarray
    seed: int
    inputs: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.states.shape[1] != self.observations.shape[1] + 1:
            raise ValueError(
                f"states have {self.states.shape[1]} columns, observations {self.observations.shape[1]}; "
                "expected T+1 and T"
            )

    @property
    def steps(self) -> int:
        return self.observations.shape[1]
