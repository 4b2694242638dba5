"""Trajectory simulation: graph SSM, tracking benchmarks, graph perturbation, SNR calibration."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from ..core.errors import DataError
from ..core.models import DynamicsKind, Operator, parse_enum
from ..graph import Graph, GraphFilter, build_graph
from .model import StateSpaceModel, Trajectory

LOGGER = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
DEFAULT_NOISE_RATIO = 0.1


def simulate(
    model: StateSpaceModel, steps: int, seed: int, inputs: np.ndarray | None = None
) -> Trajectory:
    """Draw x_0..x_T and y_1..y_T from ``model``; bit-deterministic per seed."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if model.input_filter is not None and inputs is None:
        raise DataError("input-driven model needs an input signal matrix")
    if inputs is not None:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.shape != (model.n, steps):
            raise DataError(f"inputs must have shape {(model.n, steps)}, got {inputs.shape}")

    rng = np.random.default_rng(seed)
    n, m = model.n, model.graph.m
    transition = model.transition_matrix()
    dispersion = model.incidence() * model.alpha
    obs = model.observation_matrix()
    drive = model.input_matrix()

    x0 = np.sqrt(model.sigma0_2) * rng.standard_normal(n)
    process = rng.standard_normal((steps, m))
    noise = rng.standard_normal((steps, model.n_obs))

    states = np.empty((n, steps + 1))
    states[:, 0] = x0
    for t in range(1, steps + 1):
        x = transition @ states[:, t - 1] + dispersion @ process[t - 1]
        if drive is not None:
            x = x + drive @ inputs[:, t - 1]
        states[:, t] = x
    observations = obs @ states[:, 1:] + np.sqrt(model.sigma2) * noise.T
    return Trajectory(states=states, observations=observations, seed=seed, inputs=inputs)


@dataclass(frozen=True)
class DynamicsSpec:
    """Tracking benchmark dynamics x_{t+1} = f(L, x_t) + w_t, y_t = M H x_t + v_t.

    ``noise_ratio`` is sigma_q^2 / sigma_r^2 and is stored explicitly.
    """

    kind: DynamicsKind = DynamicsKind.LINEAR_BENCHMARK
    sigma_r2: float = 0.01
    noise_ratio: float = DEFAULT_NOISE_RATIO
    obs_filter: GraphFilter = dataclasses.field(default_factory=GraphFilter.heat_kernel)
    operator: Operator = Operator.SCALED_LAPLACIAN
    observed: tuple[int, ...] | None = None
    init_var: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", parse_enum(DynamicsKind, self.kind, "kind"))
        object.__setattr__(self, "operator", parse_enum(Operator, self.operator, "operator"))
        if self.sigma_r2 <= 0 or self.noise_ratio <= 0:
            raise ValueError("benchmark noise variances must be positive")
        if self.observed is not None:
            object.__setattr__(self, "observed", tuple(int(i) for i in self.observed))

    @property
    def sigma_q2(self) -> float:
        return self.noise_ratio * self.sigma_r2

    def with_obs_noise(self, sigma_r2: float) -> "DynamicsSpec":
        return dataclasses.replace(self, sigma_r2=float(sigma_r2))

    def observed_nodes(self, n: int) -> np.ndarray:
        return np.arange(n) if self.observed is None else np.asarray(self.observed, dtype=int)


def benchmark_dynamics(kind: DynamicsKind | str, operator, x: np.ndarray) -> np.ndarray:
    """Noise-free benchmark map f(L, x) for a state (N,) or a stack (N, k)."""
    kind = parse_enum(DynamicsKind, kind, "kind")
    if kind is DynamicsKind.LINEAR_BENCHMARK:
        return np.asarray(operator @ x)
    if kind is DynamicsKind.NONLINEAR_BENCHMARK:
        return np.sin(x) + np.cos(np.asarray(operator @ x))
    raise ValueError(f"{kind.value} is not a benchmark dynamics kind")


def _benchmark_run(spec: DynamicsSpec, g: Graph, steps: int, seed: int):
    rng = np.random.default_rng(seed)
    n = g.n
    nodes = spec.observed_nodes(n)
    op = g.operator(spec.operator)
    obs = spec.obs_filter.matrix(g)[nodes]

    x0 = rng.standard_normal(n)
    process = rng.standard_normal((steps, n))
    noise = rng.standard_normal((steps, nodes.size))

    states = np.empty((n, steps + 1))
    states[:, 0] = np.sqrt(spec.init_var) * x0
    sq = np.sqrt(spec.sigma_q2)
    last = steps
    for t in range(1, steps + 1):
        x = benchmark_dynamics(spec.kind, op, states[:, t - 1]) + sq * process[t - 1]
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            last = t - 1
            break
        states[:, t] = x
    states = states[:, : last + 1]
    clean = obs @ states[:, 1:]
    noisy = clean + np.sqrt(spec.sigma_r2) * noise[:last].T
    return states, clean, noisy, last < steps


def simulate_benchmark(spec: DynamicsSpec, g: Graph, steps: int, seed: int) -> Trajectory:
    """Simulate a tracking benchmark; divergent runs are truncated at the last finite state."""
    if spec.kind is DynamicsKind.SSM:
        raise ValueError("simulate_benchmark needs a benchmark dynamics kind; use simulate for ssm")
    states, _, noisy, truncated = _benchmark_run(spec, g, steps, seed)
    diagnostics = {}
    if truncated:
        LOGGER.warning(
            "benchmark %s diverged at step %s of %s (seed %s); trajectory truncated",
            spec.kind.value, states.shape[1], steps, seed,
        )
        diagnostics = {"truncated_at": states.shape[1] - 1, "requested_steps": steps}
    if states.shape[1] < 2:
        raise DataError(f"benchmark trajectory diverged immediately (seed {seed})")
    return Trajectory(states=states, observations=noisy, seed=seed, diagnostics=diagnostics)


def clean_benchmark_observations(spec: DynamicsSpec, g: Graph, steps: int, seed: int) -> Trajectory:
    """Same draw as :func:`simulate_benchmark` but with noise-free observations."""
    states, clean, _, _ = _benchmark_run(spec, g, steps, seed)
    return Trajectory(states=states, observations=clean, seed=seed)


def target_snr_noise(clean: Trajectory, snr_db: float) -> float:
    """Observation noise variance giving ``snr_db`` against the mean squared clean observation."""
    power = float(np.mean(np.square(clean.observations)))
    if power <= 0.0:
        raise DataError("clean observations have zero signal power")
    return power / 10.0 ** (snr_db / 10.0)


def calibrate_benchmark_noise(
    spec: DynamicsSpec, g: Graph, steps: int, seed: int, snr_db: float, iterations: int = 20, rtol: float = 1e-4
) -> DynamicsSpec:
    """Fixed point on common random numbers: sigma_r^2 hits ``snr_db`` with sigma_q^2 / sigma_r^2 held."""
    current = spec
    for _ in range(iterations):
        clean = clean_benchmark_observations(current, g, steps, seed)
        sigma_r2 = target_snr_noise(clean, snr_db)
        converged = abs(sigma_r2 - current.sigma_r2) <= rtol * current.sigma_r2
        current = current.with_obs_noise(sigma_r2)
        if converged:
            break
    LOGGER.debug("calibrated sigma_r2=%.6g for %.1f dB (%s)", current.sigma_r2, snr_db, spec.kind.value)
    return current


def perturb_graph(g: Graph, sigma_e: float, seed: int) -> Graph:
    """L* = L + B diag(e) B^T with e ~ N(0, sigma_e^2 I_m), kept on the same support.

    With the weighted incidence this is the relative change w -> w (1 + e),
    clipped below at 0.05 w.
    """
    if sigma_e < 0:
        raise ValueError(f"sigma_e must be >= 0, got {sigma_e}")
    if sigma_e == 0 or g.m == 0:
        return g
    rng = np.random.default_rng(seed)
    e = sigma_e * rng.standard_normal(g.m)
    weights = g.weights
    new = np.maximum(weights * (1.0 + e), 0.05 * weights)
    return build_graph([(i, j, float(w)) for (i, j, _), w in zip(g.edges, new)], n=g.n)
