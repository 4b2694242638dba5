"""``simulate``: draw trajectories and write them with a dataset manifest."""

from __future__ import annotations

import argparse
import logging

from ..bench import random_node_mask
from ..bench.tasks import synthetic_inputs
from ..core.models import DynamicsKind
from ..core.seeding import derive_seed, substream
from ..graph import write_edge_list
from ..ssm import (
    DatasetManifest,
    DynamicsSpec,
    calibrate_benchmark_noise,
    save_trajectory,
    simulate,
    simulate_benchmark,
    write_manifest,
)
from .utils import build_model, emit, load_run, resolve_graph

LOGGER = logging.getLogger(__name__)

GRAPH_FILE = "graph.txt"
MANIFEST_FILE = "manifest.json"


def split_label(index: int, count: int) -> str:
    """Last fifth of the trajectories is test, the tenth before it validation; tiny runs are all train."""
    if count < 5:
        return "train"
    n_test = round(0.2 * count)
    n_val = round(0.1 * count)
    if index >= count - n_test:
        return "test"
    if index >= count - n_test - n_val:
        return "validation"
    return "train"


def run_simulate_command(args: argparse.Namespace) -> int:
    config = load_run(args)
    out = config.out_dir
    section = config.simulate
    graph, _ = resolve_graph(config)
    write_edge_list(graph, out / GRAPH_FILE)

    entries = []
    if section.kind is DynamicsKind.SSM:
        model = build_model(config, graph)
        observed = None if model.mask is None else list(model.mask)
        for i in range(section.trajectories):
            inputs = None
            if model.input_filter is not None:
                rng = substream(config.seed, "inputs", i)
                inputs = synthetic_inputs(graph.n, section.steps, rng, section.input_rate)
            traj = simulate(model, section.steps, derive_seed(config.seed, "trajectory", i), inputs)
            entries.append(save_trajectory(traj, out, f"traj_{i:03d}", observed=observed))
    else:
        observed = config.model.observed
        if section.observed_ratio is not None:
            observed = random_node_mask(graph.n, section.observed_ratio, substream(config.seed, "masking")).tolist()
        spec = DynamicsSpec(kind=section.kind, noise_ratio=section.noise_ratio, observed=observed)
        if section.snr_db is not None:
            spec = calibrate_benchmark_noise(
                spec, graph, section.steps, derive_seed(config.seed, "noise", section.snr_db), section.snr_db
            )
        for i in range(section.trajectories):
            traj = simulate_benchmark(spec, graph, section.steps, derive_seed(config.seed, "trajectory", i))
            entries.append(save_trajectory(traj, out, f"traj_{i:03d}", observed=observed))

    for i, entry in enumerate(entries):
        entry.split = split_label(i, len(entries))
    manifest = DatasetManifest(graph=GRAPH_FILE, trajectories=entries, observed=observed)
    path = write_manifest(manifest, out / MANIFEST_FILE)
    LOGGER.info(
        "Simulated %s %s trajectories of %s steps into %s", len(entries), section.kind.value, section.steps, out
    )
    emit({"manifest": str(path), "trajectories": len(entries), "steps": section.steps})
    return 0
