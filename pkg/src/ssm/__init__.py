"""Graph state-space model, simulators and the analytic SPDE kernel."""

from .io import (
    DatasetManifest,
    TrajectoryFiles,
    load_trajectory,
    read_manifest,
    read_matrix_csv,
    save_trajectory,
    write_manifest,
    write_matrix_csv,
)
from .kernel import KernelCheck, analytic_kernel_cov, kernel_monte_carlo
from .model import LinearGaussianSystem, StateSpaceModel, Trajectory, transition_for, transition_matrix
from .simulate import (
    DynamicsSpec,
    benchmark_dynamics,
    calibrate_benchmark_noise,
    clean_benchmark_observations,
    perturb_graph,
    simulate,
    simulate_benchmark,
    target_snr_noise,
)

__all__ = [
    "DatasetManifest",
    "DynamicsSpec",
    "KernelCheck",
    "LinearGaussianSystem",
    "StateSpaceModel",
    "Trajectory",
    "TrajectoryFiles",
    "analytic_kernel_cov",
    "benchmark_dynamics",
    "calibrate_benchmark_noise",
    "clean_benchmark_observations",
    "kernel_monte_carlo",
    "load_trajectory",
    "perturb_graph",
    "read_manifest",
    "read_matrix_csv",
    "save_trajectory",
    "simulate",
    "simulate_benchmark",
    "target_snr_noise",
    "transition_for",
    "transition_matrix",
    "write_manifest",
    "write_matrix_csv",
]
