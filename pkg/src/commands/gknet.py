"""``train-gknet``: fit GKNet on a dataset manifest."""

from __future__ import annotations

import argparse
import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from ..bench import (
    Dataset,
    Normalizer,
    concat_windows,
    event_dataset,
    load_dataset,
    maybe_signal_windows,
    signal_windows,
    tracking_windows,
)
from ..core.config import RunConfig
from ..core.errors import DataError, TrainingAborted
from ..core.models import Task
from ..gknet import GKNetConfig, GKNetModel, LossCurves, WindowSet, save_checkpoint, train
from ..graph import Graph
from ..ssm import Trajectory, read_manifest
from .utils import emit, load_manifest_data, load_run, require_dataset

LOGGER = logging.getLogger(__name__)

CHECKPOINT_FILE = "gknet.json"
CURVES_FILE = "loss_curves.csv"


@dataclass(frozen=True, eq=False)
class TaskWindows:
    graph: Graph
    graph_file: str
    train: WindowSet
    validation: WindowSet | None
    test: WindowSet | None
    scaler: Normalizer | None = None


def _horizon(gknet: GKNetConfig) -> int:
    if gknet.task is Task.FORECASTING:
        return gknet.horizon
    return 1 if gknet.task is Task.INPUT_DRIVEN else 0


def _signal_task_windows(gknet: GKNetConfig, path: str, manifest) -> TaskWindows:
    data = load_dataset(path)
    seg = data.segment("train")
    scaler = Normalizer.fit(seg.signals, seg.mask)
    data = dataclasses.replace(data, signals=scaler.apply(data.signals))
    window, horizon = data.window, _horizon(gknet)
    if gknet.task is Task.INPUT_DRIVEN and data.inputs is None:
        raise DataError("the input-driven task needs an 'inputs' matrix in the manifest")
    return TaskWindows(
        graph=data.graph,
        graph_file=str(manifest.resolve(manifest.graph)),
        train=signal_windows(data.segment("train"), window, horizon=horizon),
        validation=maybe_signal_windows(data.segment("validation"), window, horizon=horizon),
        test=maybe_signal_windows(data.segment("test"), window, horizon=horizon, stride=window),
        scaler=scaler,
    )


def trajectory_windows(
    gknet: GKNetConfig, graph: Graph, trajectories: list[Trajectory], observed, window: int, stride: int | None = None
) -> WindowSet | None:
    """Windows for one split of a trajectory manifest, shaped for ``gknet.task``."""
    if not trajectories:
        return None
    if gknet.task is Task.TRACKING:
        nodes = np.arange(graph.n) if observed is None else observed
        return tracking_windows(trajectories, graph.n, nodes, window)
    if gknet.task is Task.INPUT_DRIVEN:
        datasets = [event_dataset(graph, t, window) for t in trajectories]
    else:
        if any(t.observations.shape[0] != graph.n for t in trajectories):
            raise DataError(f"task {gknet.task.value} on trajectories needs all {graph.n} nodes observed")
        datasets = [
            Dataset(graph=graph, signals=t.observations, split={"test": 1.0}, window=window) for t in trajectories
        ]
    sets = [maybe_signal_windows(d, window, horizon=_horizon(gknet), stride=stride) for d in datasets]
    sets = [s for s in sets if s is not None]
    return concat_windows(sets) if sets else None


def task_windows(config: RunConfig, gknet: GKNetConfig) -> TaskWindows:
    """Train/validation/test windows from the configured dataset manifest."""
    path = require_dataset(config)
    manifest = read_manifest(path)
    if manifest.signals:
        return _signal_task_windows(gknet, path, manifest)
    data = load_manifest_data(path)
    window = config.train.window
    observed = data.manifest.observed
    training = trajectory_windows(gknet, data.graph, data.split("train"), observed, window)
    if training is None or len(training) == 0:
        raise DataError(f"no training windows of length {window} in {path}")
    return TaskWindows(
        graph=data.graph,
        graph_file=data.graph_file,
        train=training,
        validation=trajectory_windows(gknet, data.graph, data.split("validation"), observed, window),
        test=trajectory_windows(gknet, data.graph, data.split("test"), observed, window, stride=window),
    )


def run_train_gknet_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    windows = task_windows(config, config.gknet)
    model = GKNetModel.build(windows.graph, config.gknet, seed=config.seed)
    curves_path = config.out_dir / CURVES_FILE
    try:
        result = train(model, windows.train, windows.validation, config.train)
    except TrainingAborted as exc:
        LossCurves(**exc.curves).write_csv(curves_path)
        raise
    result.curves.write_csv(curves_path)

    extra = {"best_epoch": result.best_epoch}
    if windows.scaler is not None:
        extra["normalizer"] = {"mean": windows.scaler.mean, "std": windows.scaler.std}
    path = save_checkpoint(model, config.out_dir / CHECKPOINT_FILE, config.seed, windows.graph_file, extra)
    emit(
        {
            "checkpoint": str(path),
            "best_epoch": result.best_epoch,
            "stopped_early": result.stopped_early,
            "train_loss": result.curves.train[-1],
            "validation_loss": result.curves.validation[-1] if result.curves.validation else None,
        }
    )
    return 0
