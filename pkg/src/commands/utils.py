"""Shared utilities for CLI commands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.config import RunConfig, load_run_config, write_config_echo
from ..core.errors import ConfigError, DataError
from ..core.seeding import derive_seed
from ..graph import Graph, GraphFilter, erdos_renyi, read_edge_list
from ..ssm import DatasetManifest, StateSpaceModel, Trajectory, load_trajectory, read_manifest

LOGGER = logging.getLogger(__name__)


def load_run(args: argparse.Namespace) -> RunConfig:
    """Resolve the run config from the parsed flags and write its echo into the output directory."""
    config = load_run_config(
        getattr(args, "config", None),
        getattr(args, "set", None) or (),
        seed=getattr(args, "seed", None),
        out=getattr(args, "out", None),
        threads=getattr(args, "threads", None),
        preset=getattr(args, "preset", None),
    )
    if config.verbosity and not getattr(args, "verbosity", None):
        level = getattr(logging, config.verbosity.upper(), None)
        if not isinstance(level, int):
            raise ConfigError(f"verbosity: unknown log level {config.verbosity!r}")
        logging.getLogger().setLevel(level)
    write_config_echo(config)
    return config


def resolve_graph(config: RunConfig) -> tuple[Graph, str | None]:
    """The configured edge list (and its resolved path), or a seeded ER sample."""
    section = config.graph
    if section.file:
        path = Path(section.file).expanduser().resolve()
        return read_edge_list(path), str(path)
    graph = erdos_renyi(section.n, section.p, derive_seed(config.seed, "graph"))
    LOGGER.info("Sampled ER graph: n=%s, m=%s", graph.n, graph.m)
    return graph, None


def build_model(config: RunConfig, graph: Graph) -> StateSpaceModel:
    section = config.model
    try:
        return StateSpaceModel(
            graph=graph,
            c=section.c,
            alpha=np.asarray(section.alpha, dtype=float),
            obs_filter=GraphFilter(tuple(section.h), section.filter_operator),
            sigma2=section.sigma2,
            sigma0_2=section.sigma0_2,
            mask=None if section.observed is None else tuple(section.observed),
            transition_mode=section.transition_mode,
            dt=section.dt,
            operator=section.operator,
            input_filter=None if section.input_filter is None else GraphFilter(tuple(section.input_filter)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def require_dataset(config: RunConfig) -> str:
    if not config.dataset:
        raise ConfigError("dataset: a dataset manifest path is required for this command")
    return config.dataset


@dataclass(frozen=True, eq=False)
class ManifestData:
    manifest: DatasetManifest
    graph: Graph
    graph_file: str
    trajectories: list[Trajectory]

    def split(self, name: str) -> list[Trajectory]:
        return [t for t, entry in zip(self.trajectories, self.manifest.trajectories) if entry.split == name]


def load_manifest_data(path: str) -> ManifestData:
    manifest = read_manifest(path)
    graph_file = manifest.resolve(manifest.graph)
    graph = read_edge_list(graph_file)
    trajectories = [load_trajectory(manifest, entry) for entry in manifest.trajectories]
    LOGGER.info("Loaded %s trajectories on a %s-node graph from %s", len(trajectories), graph.n, path)
    return ManifestData(manifest=manifest, graph=graph, graph_file=str(graph_file), trajectories=trajectories)


def require_trajectories(data: ManifestData) -> list[Trajectory]:
    if not data.trajectories:
        raise DataError("the dataset manifest lists no trajectories")
    return data.trajectories


def emit(payload: dict) -> None:
    """One JSON line on stdout."""
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
