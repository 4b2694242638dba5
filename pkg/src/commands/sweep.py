"""``track-sweep``: tracking MSE over SNR for the true and the perturbed graph."""

from __future__ import annotations

import argparse
import logging

from ..bench import run_tracking_experiment
from ..core.errors import TrainingAborted
from .utils import emit, load_run

LOGGER = logging.getLogger(__name__)


def run_track_sweep_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    tracking = config.tracking
    LOGGER.info(
        "Tracking sweep: %s, n=%s, %s trajectories x %s steps, %s SNR values, graph modes %s",
        tracking.kind.value,
        tracking.n,
        tracking.trajectories,
        tracking.steps,
        len(tracking.snrs),
        tracking.graph_modes,
    )
    try:
        report = run_tracking_experiment(tracking)
    except TrainingAborted as exc:
        if exc.report is not None:
            csv_path, _ = exc.report.write(config.out_dir)
            LOGGER.error("Training aborted; partial report with %s rows in %s", len(exc.report.rows), csv_path)
        raise
    csv_path, json_path = report.write(config.out_dir)
    emit({"report": str(csv_path), "summary": str(json_path), "rows": len(report.rows)})
    return 0
