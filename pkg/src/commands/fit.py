"""``fit-em`` and ``fit-grad``: identify the graph SSM from a dataset manifest."""

from __future__ import annotations

import argparse
import logging

import pandas as pd

from ..core.config import RunConfig
from ..graph import GraphFilter
from ..kalman import dump_trace_csv, kalman_filter, kalman_smoother
from ..learn import FitResult, em_fit, grad_fit, initial_model, write_fitted_model
from ..learn.em import as_sequences
from .utils import ManifestData, emit, load_manifest_data, load_run, require_dataset, require_trajectories

LOGGER = logging.getLogger(__name__)

MODEL_FILE = "model.json"
NLL_FILE = "nll_trace.csv"
TRACE_FILE = "trace.csv"


def _fit(config: RunConfig, data: ManifestData, method: str) -> FitResult:
    trajectories = require_trajectories(data)
    observations = [t.observations for t in trajectories]
    inputs = [t.inputs for t in trajectories] if all(t.inputs is not None for t in trajectories) else None
    mask = data.manifest.observed
    fit_config = config.em if method == "em" else config.grad

    init = None
    if inputs is not None:
        if config.model.input_filter is None:
            LOGGER.warning("dataset carries input signals but model.input_filter is unset; fitting without them")
            inputs = None
        else:
            seqs, _ = as_sequences(observations)
            init = initial_model(data.graph, seqs, fit_config, mask, GraphFilter(tuple(config.model.input_filter)))
    fit = em_fit if method == "em" else grad_fit
    return fit(observations, data.graph, fit_config, init=init, inputs=inputs, mask=mask)


def _write(config: RunConfig, data: ManifestData, result: FitResult, dump_trace: bool) -> dict:
    out = config.out_dir
    model_path = write_fitted_model(
        result.model, out / MODEL_FILE, graph_file=data.graph_file, nll_trace=result.nll_trace
    )
    frame = pd.DataFrame({"iteration": range(len(result.nll_trace)), "nll": result.nll_trace})
    frame.to_csv(out / NLL_FILE, index=False, float_format="%.17g")
    if dump_trace:
        first = data.trajectories[0]
        trace = kalman_filter(result.model, first.observations, first.inputs if result.model.input_filter else None)
        dump_trace_csv(trace, out / TRACE_FILE, kalman_smoother(result.model, trace))
    return {
        "model": str(model_path),
        "iterations": len(result.nll_trace) - 1,
        "final_nll": result.nll_trace[-1],
        "converged": result.converged,
        "sigma2": result.model.sigma2,
        "h": list(result.model.obs_filter.coeffs),
    }


def run_fit_em_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    data = load_manifest_data(require_dataset(config))
    result = _fit(config, data, "em")
    emit(_write(config, data, result, getattr(args, "dump_trace", False)))
    return 0


def run_fit_grad_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    data = load_manifest_data(require_dataset(config))
    result = _fit(config, data, "grad")
    emit(_write(config, data, result, getattr(args, "dump_trace", False)))
    return 0
