"""``evaluate``: task experiments, or scoring of a fitted SSM or a GKNet checkpoint."""

from __future__ import annotations

import argparse
import dataclasses
import logging

import numpy as np

from ..bench import (
    ExperimentReport,
    Normalizer,
    mse_db,
    nrmse,
    run_forecasting_experiment,
    run_imputation_experiment,
    run_input_driven_experiment,
    scatter_observations,
)
from ..core.config import RunConfig
from ..core.errors import ConfigError, DataError
from ..core.models import Task, to_plain
from ..gknet import checkpoint_extra, load_checkpoint
from ..kalman import dump_trace_csv, kalman_filter, kalman_smoother
from ..learn import read_fitted_model
from .gknet import task_windows
from .utils import emit, load_manifest_data, load_run, require_dataset, require_trajectories

LOGGER = logging.getLogger(__name__)

EXPERIMENT_RUNNERS = {
    "forecasting": run_forecasting_experiment,
    "imputation": run_imputation_experiment,
    "input-driven": run_input_driven_experiment,
}
TRACE_FILE = "trace.csv"


def _evaluate_task(config: RunConfig) -> ExperimentReport:
    task = config.task
    if task.dataset is None and config.dataset:
        task = dataclasses.replace(task, dataset=config.dataset)
    return EXPERIMENT_RUNNERS[config.evaluate.experiment](task)


def _evaluate_model(config: RunConfig, dump_trace: bool) -> ExperimentReport:
    """Filter and smooth every trajectory with a fitted SSM; NLL and state MSE per trajectory."""
    if not config.evaluate.model:
        raise ConfigError("evaluate.model: a fitted model path is required for target 'model'")
    data = load_manifest_data(require_dataset(config))
    model, _ = read_fitted_model(config.evaluate.model, graph=data.graph)
    report = ExperimentReport(name="evaluate", scenario_keys=("trajectory",), config=to_plain(config))
    for index, traj in enumerate(require_trajectories(data)):
        inputs = traj.inputs if model.input_filter is not None else None
        trace = kalman_filter(model, traj.observations, inputs)
        smoothed = kalman_smoother(model, trace)
        report.add("kalman", "nll", trace.nll(constants=True), traj.seed, trajectory=index)
        truth = traj.states[:, 1:]
        report.add("kalman", "filtered_mse_db", mse_db(trace.means[1:].T, truth), traj.seed, trajectory=index)
        report.add("kalman", "smoothed_mse_db", mse_db(smoothed.means[1:].T, truth), traj.seed, trajectory=index)
        if dump_trace and index == 0:
            dump_trace_csv(trace, config.out_dir / TRACE_FILE, smoothed)
    return report


def _evaluate_checkpoint(config: RunConfig) -> ExperimentReport:
    """Test-split score of a checkpoint: state MSE dB for tracking, nRMSE otherwise."""
    path = config.evaluate.checkpoint
    if not path:
        raise ConfigError("evaluate.checkpoint: a checkpoint path is required for target 'checkpoint'")
    model = load_checkpoint(path)
    report = ExperimentReport(name="evaluate", scenario_keys=("split",), config=to_plain(config))
    task = model.config.task
    seed = config.seed

    if task is Task.TRACKING:
        data = load_manifest_data(require_dataset(config))
        test = data.split("test") or require_trajectories(data)
        observed = data.manifest.observed
        nodes = np.arange(model.graph.n) if observed is None else np.asarray(observed, dtype=int)
        node_mask = np.isin(np.arange(model.graph.n), nodes)
        estimates, truth = [], []
        for traj in test:
            padded = scatter_observations(traj, model.graph.n, nodes)
            estimates.append(model.predict(padded.T[None], mask=node_mask)[0].T)
            truth.append(traj.states[:, 1:])
        value = mse_db(np.concatenate(estimates, axis=1), np.concatenate(truth, axis=1))
        report.add("gknet", "mse_db", value, seed, split="test")
        return report

    windows = task_windows(config, model.config)
    if windows.test is None:
        raise DataError("the dataset has no test segment long enough for one window")
    test = windows.test
    inputs = test.inputs if model.config.with_inputs else None
    predicted = model.predict(test.observations, mask=test.obs_mask, inputs=inputs)
    targets = test.targets
    stored = checkpoint_extra(path).get("normalizer")
    if stored is not None:
        scaler = Normalizer(float(stored["mean"]), float(stored["std"]))
        predicted, targets = scaler.invert(predicted), scaler.invert(targets)
    report.add("gknet", "nrmse", nrmse(predicted, targets, test.target_mask), seed, split="test")
    return report


def run_evaluate_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    target = config.evaluate.target
    if target == "task":
        report = _evaluate_task(config)
    elif target == "model":
        report = _evaluate_model(config, getattr(args, "dump_trace", False))
    else:
        report = _evaluate_checkpoint(config)
    csv_path, json_path = report.write(config.out_dir)
    emit({"report": str(csv_path), "summary": str(json_path), "means": report.summary()["means"]})
    return 0
