"""Benchmark harness: datasets, metrics and scripted experiments."""

from .dataset import (
    Dataset,
    Normalizer,
    concat_windows,
    event_dataset,
    fill_gaps,
    load_dataset,
    load_events,
    maybe_signal_windows,
    random_node_mask,
    scatter_observations,
    signal_windows,
    sliding_windows,
    tracking_windows,
)
from .metrics import MSE_DB_FLOOR, mse, mse_db, nrmse
from .report import ExperimentReport, run_cells
from .tasks import (
    TaskConfig,
    run_forecasting_experiment,
    run_imputation_experiment,
    run_input_driven_experiment,
    synthetic_dataset,
    synthetic_events,
)
from .tracking import PRESETS, TrackingConfig, reference_system, run_tracking_experiment, tracking_data

__all__ = [
    "Dataset",
    "ExperimentReport",
    "MSE_DB_FLOOR",
    "Normalizer",
    "PRESETS",
    "TaskConfig",
    "TrackingConfig",
    "concat_windows",
    "event_dataset",
    "fill_gaps",
    "load_dataset",
    "load_events",
    "maybe_signal_windows",
    "mse",
    "mse_db",
    "nrmse",
    "random_node_mask",
    "reference_system",
    "run_cells",
    "run_forecasting_experiment",
    "run_imputation_experiment",
    "run_input_driven_experiment",
    "run_tracking_experiment",
    "scatter_observations",
    "signal_windows",
    "sliding_windows",
    "synthetic_dataset",
    "synthetic_events",
    "tracking_data",
    "tracking_windows",
]
