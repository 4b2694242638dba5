"""Validation suites: ``kernel-check`` and ``grad-check``."""

from __future__ import annotations

import argparse
import dataclasses
import logging

import numpy as np
import pandas as pd

from ..autodiff import check_parameters
from ..core.models import Task
from ..core.seeding import derive_seed, substream
from ..gknet import GKNetModel, named_tensors
from ..graph import erdos_renyi
from ..ssm import kernel_monte_carlo
from .utils import emit, load_run, resolve_graph

LOGGER = logging.getLogger(__name__)

KERNEL_FILE = "kernel_check.csv"
GRAD_FILE = "grad_check.csv"


def run_kernel_check_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    section = config.kernel_check
    graph, _ = resolve_graph(config)
    dispersion = graph.incidence.toarray() * section.alpha
    check = kernel_monte_carlo(
        graph,
        section.c,
        dispersion,
        section.t,
        section.s,
        dt=section.dt,
        paths=section.paths,
        seed=derive_seed(config.seed, "kernel"),
    )
    rows, cols = np.indices(check.analytic.shape)
    pd.DataFrame(
        {
            "i": rows.reshape(-1),
            "j": cols.reshape(-1),
            "empirical": check.empirical.reshape(-1),
            "analytic": check.analytic.reshape(-1),
            "std_error": check.std_error.reshape(-1),
        }
    ).to_csv(config.out_dir / KERNEL_FILE, index=False, float_format="%.17g")
    passed = check.max_se_multiple < section.tolerance
    emit(
        {
            "max_abs_error": check.max_abs_error,
            "max_se_multiple": check.max_se_multiple,
            "tolerance": section.tolerance,
            "passed": passed,
        }
    )
    if not passed:
        LOGGER.warning("Kernel check exceeded %.1f standard errors", section.tolerance)
    return 0 if passed else 1


def _task_batch(config, task: Task, n: int) -> dict:
    section = config.grad_check
    rng = substream(config.seed, "grad-check", task.value)
    shape = (section.batch, section.steps, n)
    batch = {"observations": rng.standard_normal(shape), "targets": rng.standard_normal(shape)}
    if task is Task.INPUT_DRIVEN:
        batch["inputs"] = rng.standard_normal(shape)
    return batch


def run_grad_check_command(args: argparse.Namespace) -> int:
    """Finite differences against reverse mode for every GKNet tensor, per task head, through the full loss."""
    config = load_run(args)
    section = config.grad_check
    graph = erdos_renyi(section.n, section.p, derive_seed(config.seed, "graph"))
    records = []
    for task in section.tasks:
        gknet = dataclasses.replace(config.gknet, task=task)
        model = GKNetModel.build(graph, gknet, seed=config.seed)
        batch = _task_batch(config, task, graph.n)

        def loss():
            trace = model.forward(batch["observations"], inputs=batch.get("inputs"), training=True)
            return model.loss(trace, batch["targets"])

        params = model.parameters()
        names = {id(t): name for name, t in named_tensors(model).items()}
        nudge_seed = derive_seed(config.seed, "grad-check-nudge", task.value)
        results = check_parameters(loss, params, section.epsilon, nudge=section.nudge, seed=nudge_seed)
        for position, result in results.items():
            records.append(
                {
                    "task": task.value,
                    "tensor": names.get(id(params[position]), f"param.{position}"),
                    "max_rel_error": result.max_rel_error,
                    "passed": result.passed(section.tolerance),
                }
            )
        LOGGER.info("Gradient check for %s: worst %.3e", task.value, max(r.max_rel_error for r in results.values()))
    frame = pd.DataFrame(records)
    frame.to_csv(config.out_dir / GRAD_FILE, index=False, float_format="%.6e")
    failed = frame.loc[~frame["passed"], ["task", "tensor"]].astype(str).agg(":".join, axis=1).tolist()
    emit({"checked": len(frame), "worst": float(frame["max_rel_error"].max()), "failed": failed})
    return 0 if not failed else 1
