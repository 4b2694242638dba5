"""Tracking sweeps on the synthetic benchmark dynamics.

Each cell is (graph mode, SNR). Data for one SNR is shared by both graph
modes; the learner and the reference filter only differ in the graph they
are handed (the true one or a perturbed copy).
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..core.models import DynamicsKind, Task, parse_enum, to_plain
from ..core.seeding import derive_seed, substream
from ..gknet import GKNetConfig, GKNetModel, TrainConfig, train
from ..graph import Graph, erdos_renyi
from ..kalman import kalman_filter
from ..ssm import (
    DynamicsSpec,
    LinearGaussianSystem,
    Trajectory,
    calibrate_benchmark_noise,
    perturb_graph,
    simulate_benchmark,
)
from .dataset import random_node_mask, scatter_observations, tracking_windows
from .metrics import mse_db
from .report import ExperimentReport, run_cells

LOGGER = logging.getLogger(__name__)

GRAPH_MODES = ("true", "noisy")
DEFAULT_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
PRESETS: dict[str, dict] = {
    "desk": {"n": 16, "trajectories": 200, "steps": 100},
    "full": {"n": 32, "trajectories": 2000, "steps": 200},
}
REFERENCE = "kalman-reference"
LEARNED = "gknet"
ASSUMPTIONS = (
    "SNR is the observation SNR with sigma_q^2 / sigma_r^2 fixed",
    "ER edge probability defaults to 0.2",
    "a seeded 75% node subset is observed unless configured",
)


@dataclass(frozen=True)
class TrackingConfig:
    kind: DynamicsKind = DynamicsKind.LINEAR_BENCHMARK
    n: int = 16
    p: float = 0.2
    trajectories: int = 200
    steps: int = 100
    snrs: tuple[float, ...] = DEFAULT_SNRS
    graph_modes: tuple[str, ...] = GRAPH_MODES
    sigma_e: float = 0.1
    noise_ratio: float = 0.1
    observed_ratio: float = 0.75
    validation_fraction: float = 0.1
    test_fraction: float = 0.2
    gknet: GKNetConfig = field(default_factory=lambda: GKNetConfig(task=Task.TRACKING))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(window=20))
    threads: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", parse_enum(DynamicsKind, self.kind, "kind"))
        if self.kind is DynamicsKind.SSM:
            raise ValueError("tracking sweeps run a benchmark dynamics kind")
        unknown = set(self.graph_modes) - set(GRAPH_MODES)
        if unknown:
            raise ValueError(f"graph modes must be among {GRAPH_MODES}, got {sorted(unknown)}")
        object.__setattr__(self, "snrs", tuple(float(s) for s in self.snrs))
        object.__setattr__(self, "graph_modes", tuple(self.graph_modes))
        held_out = self.validation_fraction + self.test_fraction
        if not 0.0 < self.test_fraction or held_out >= 1.0:
            raise ValueError("validation and test fractions must leave training trajectories")

    def with_preset(self, name: str) -> "TrackingConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        return dataclasses.replace(self, **PRESETS[name])


@dataclass(frozen=True, eq=False)
class TrackingData:
    graph: Graph
    observed: np.ndarray
    spec: DynamicsSpec
    train: list[Trajectory]
    validation: list[Trajectory]
    test: list[Trajectory]


def benchmark_graph(config: TrackingConfig) -> Graph:
    return erdos_renyi(config.n, config.p, derive_seed(config.seed, "graph"))


def tracking_data(config: TrackingConfig, snr_db: float) -> TrackingData:
    """Trajectories for one SNR, split by index into train/validation/test."""
    graph = benchmark_graph(config)
    observed = random_node_mask(config.n, config.observed_ratio, substream(config.seed, "masking"))
    spec = DynamicsSpec(kind=config.kind, noise_ratio=config.noise_ratio, observed=tuple(observed))
    spec = calibrate_benchmark_noise(spec, graph, config.steps, derive_seed(config.seed, "noise", snr_db), snr_db)
    trajs = [
        simulate_benchmark(spec, graph, config.steps, derive_seed(config.seed, "trajectory", snr_db, i))
        for i in range(config.trajectories)
    ]
    n_test = max(int(round(config.test_fraction * len(trajs))), 1)
    n_val = int(round(config.validation_fraction * len(trajs)))
    n_train = len(trajs) - n_test - n_val
    if n_train < 1:
        raise ValueError(f"{config.trajectories} trajectories leave no training data")
    return TrackingData(
        graph=graph,
        observed=observed,
        spec=spec,
        train=trajs[:n_train],
        validation=trajs[n_train : n_train + n_val],
        test=trajs[n_train + n_val :],
    )


def least_squares_dynamics(trajs: list[Trajectory]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Affine fit x_{t+1} ~ A x_t + b on training states; returns (A, b, residual covariance)."""
    prev = np.concatenate([t.states[:, :-1] for t in trajs], axis=1)
    nxt = np.concatenate([t.states[:, 1:] for t in trajs], axis=1)
    design = np.vstack([prev, np.ones((1, prev.shape[1]))])
    coef, *_ = np.linalg.lstsq(design.T, nxt.T, rcond=None)
    a, b = coef[:-1].T, coef[-1]
    residual = nxt - a @ prev - b[:, None]
    return a, b, np.cov(residual) + 1e-12 * np.eye(a.shape[0])


def reference_system(
    config: TrackingConfig, data: TrackingData, graph: Graph
) -> tuple[LinearGaussianSystem, np.ndarray | None]:
    """Exact linear-Gaussian model on ``graph`` (linear dynamics) or the least-squares surrogate.

    Returns the system and the constant offset fed through its input matrix.
    """
    spec = data.spec
    n = graph.n
    observation = spec.obs_filter.matrix(graph)[data.observed]
    common = dict(
        observation=observation,
        obs_cov=spec.sigma_r2 * np.eye(observation.shape[0]),
        init_mean=np.zeros(n),
        init_cov=spec.init_var * np.eye(n),
    )
    if config.kind is DynamicsKind.LINEAR_BENCHMARK:
        transition = graph.operator(spec.operator).toarray()
        return LinearGaussianSystem(transition=transition, process_cov=spec.sigma_q2 * np.eye(n), **common), None
    a, b, q = least_squares_dynamics(data.train)
    return LinearGaussianSystem(transition=a, process_cov=q, input_matrix=np.eye(n), **common), b


def reference_mse_db(config: TrackingConfig, data: TrackingData, graph: Graph) -> float:
    system, offset = reference_system(config, data, graph)
    estimates, truth = [], []
    for traj in data.test:
        inputs = None if offset is None else np.repeat(offset[:, None], traj.steps, axis=1)
        trace = kalman_filter(system, traj.observations, inputs)
        estimates.append(trace.means[1:].T)
        truth.append(traj.states[:, 1:])
    return mse_db(np.concatenate(estimates, axis=1), np.concatenate(truth, axis=1))


def gknet_mse_db(config: TrackingConfig, data: TrackingData, graph: Graph, cell_seed: int) -> float:
    window = min(config.train.window, config.steps)
    train_config = dataclasses.replace(config.train, window=window, seed=cell_seed)
    model = GKNetModel.build(graph, config.gknet, seed=cell_seed)
    train_set = tracking_windows(data.train, graph.n, data.observed, window)
    validation = tracking_windows(data.validation, graph.n, data.observed, window) if data.validation else None
    train(model, train_set, validation, train_config)

    estimates, truth = [], []
    for traj in data.test:
        padded = scatter_observations(traj, graph.n, data.observed)
        predicted = model.predict(padded.T[None], mask=np.isin(np.arange(graph.n), data.observed))
        estimates.append(predicted[0].T)
        truth.append(traj.states[:, 1:])
    return mse_db(np.concatenate(estimates, axis=1), np.concatenate(truth, axis=1))


def run_cell(config: TrackingConfig, mode: str, snr_db: float, data: TrackingData) -> list[dict]:
    # shared by both graph modes: only the graph differs between a true and a noisy cell
    cell_seed = derive_seed(config.seed, "cell", snr_db)
    graph = data.graph
    if mode == "noisy":
        graph = perturb_graph(data.graph, config.sigma_e, derive_seed(config.seed, "noisy-graph"))
    scenario = {"kind": config.kind.value, "graph_mode": mode, "snr_db": snr_db}
    rows = [
        {**scenario, "method": REFERENCE, "metric": "mse_db", "seed": cell_seed,
         "value": reference_mse_db(config, data, graph)},
        {**scenario, "method": LEARNED, "metric": "mse_db", "seed": cell_seed,
         "value": gknet_mse_db(config, data, graph, cell_seed)},
    ]
    LOGGER.info(
        "Cell %s/%s dB finished: reference %.2f dB, gknet %.2f dB", mode, snr_db, rows[0]["value"], rows[1]["value"]
    )
    return rows


def run_tracking_experiment(config: TrackingConfig) -> ExperimentReport:
    """Sweep graph modes and SNRs; one reference row and one GKNet row per cell.

    A training abort re-raises with the rows finished so far attached as ``report``.
    """
    started = time.perf_counter()
    data = {snr: tracking_data(config, snr) for snr in config.snrs}
    report = ExperimentReport(
        name="tracking",
        scenario_keys=("kind", "graph_mode", "snr_db"),
        config=to_plain(config),
        assumptions=list(ASSUMPTIONS),
        wall_clock=time.perf_counter() - started,
    )
    cells = [
        functools.partial(run_cell, config, mode, snr, data[snr]) for snr in config.snrs for mode in config.graph_modes
    ]
    return run_cells(report, cells, config.threads)

