"""Node time-series datasets, chronological splits and window construction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..core.errors import DataError, DimensionError
from ..gknet import WindowSet
from ..graph import Graph, read_edge_list
from ..ssm import Trajectory, load_trajectory, read_manifest, read_matrix_csv

LOGGER = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Signals (N x T) on a graph with an availability mask and optional input signals."""

    graph: Graph
    signals: np.ndarray
    mask: np.ndarray | None = None
    inputs: np.ndarray | None = None
    split: dict[str, float] = field(default_factory=lambda: {"train": 0.7, "validation": 0.1, "test": 0.2})
    window: int = 12
    horizon: int = 1

    def __post_init__(self) -> None:
        signals = np.asarray(self.signals, dtype=float)
        if signals.ndim != 2 or signals.shape[0] != self.graph.n:
            raise DimensionError(f"signals must be ({self.graph.n}, T), got {signals.shape}")
        object.__setattr__(self, "signals", signals)
        mask = np.ones(signals.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != signals.shape:
            raise DimensionError(f"mask shape {mask.shape} does not match signals {signals.shape}")
        object.__setattr__(self, "mask", mask)
        if self.inputs is not None and np.shape(self.inputs) != signals.shape:
            raise DimensionError(f"inputs shape {np.shape(self.inputs)} does not match signals {signals.shape}")
        if set(self.split) - set(SPLIT_NAMES):
            raise DataError(f"split names must be among {SPLIT_NAMES}, got {sorted(self.split)}")
        if abs(sum(self.split.values()) - 1.0) > 1e-9 or any(v < 0 for v in self.split.values()):
            raise DataError(f"split fractions must be nonnegative and sum to 1, got {self.split}")

    @property
    def steps(self) -> int:
        return self.signals.shape[1]

    def bounds(self) -> dict[str, tuple[int, int]]:
        """Chronological [start, stop) column ranges per split."""
        edges, start = {}, 0
        for name in SPLIT_NAMES:
            stop = start + int(round(self.split.get(name, 0.0) * self.steps))
            edges[name] = (start, min(stop, self.steps))
            start = edges[name][1]
        edges["test"] = (edges["test"][0], self.steps)
        return edges

    def segment(self, name: str, fraction: float | None = None) -> "Dataset":
        """Columns of one split; ``fraction`` of the whole series caps the training segment."""
        start, stop = self.bounds()[name]
        if fraction is not None:
            stop = min(stop, start + max(int(round(fraction * self.steps)), 1))
        cols = slice(start, stop)
        return Dataset(
            graph=self.graph,
            signals=self.signals[:, cols],
            mask=self.mask[:, cols],
            inputs=None if self.inputs is None else self.inputs[:, cols],
            split={"test": 1.0},
            window=self.window,
            horizon=self.horizon,
        )


def _read_optional(manifest, name: str | None) -> np.ndarray | None:
    if not name:
        return None
    _, _, matrix = read_matrix_csv(manifest.resolve(name))
    return matrix


def load_dataset(path: Path | str) -> Dataset:
    """Load a dataset manifest that names a signal matrix (user data)."""
    manifest = read_manifest(path)
    if not manifest.signals:
        raise DataError(f"manifest {path} has no 'signals' file")
    graph = read_edge_list(manifest.resolve(manifest.graph))
    _, _, signals = read_matrix_csv(manifest.resolve(manifest.signals))
    mask = _read_optional(manifest, manifest.mask)
    LOGGER.info("Loaded dataset %s: n=%s, T=%s", path, signals.shape[0], signals.shape[1])
    return Dataset(
        graph=graph,
        signals=signals,
        mask=None if mask is None else mask != 0,
        inputs=_read_optional(manifest, manifest.inputs),
        split=dict(manifest.split),
        window=manifest.window,
        horizon=manifest.horizon,
    )


def load_events(path: Path | str) -> tuple[Graph, list[Trajectory]]:
    """Load the graph and every trajectory (event) a manifest lists."""
    manifest = read_manifest(path)
    graph = read_edge_list(manifest.resolve(manifest.graph))
    events = [load_trajectory(manifest, entry) for entry in manifest.trajectories]
    if not events:
        raise DataError(f"manifest {path} lists no trajectories")
    return graph, events


def fill_gaps(signals: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Linear interpolation in time over unavailable entries, per node."""
    frame = pd.DataFrame(np.where(mask, signals, np.nan).T)
    filled = frame.interpolate(axis=0, limit_direction="both").fillna(0.0)
    return filled.to_numpy().T


def random_node_mask(n: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of ``round(ratio * n)`` observed nodes (at least one)."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"observation ratio must be in (0, 1], got {ratio}")
    count = max(int(round(ratio * n)), 1)
    return np.sort(rng.choice(n, size=count, replace=False))


def sliding_windows(matrix: np.ndarray, window: int, stride: int | None = None) -> np.ndarray:
    """(N, T) -> (S, window, N) windows starting every ``stride`` columns."""
    matrix = np.asarray(matrix)
    steps = matrix.shape[1]
    stride = stride or window
    if steps < window:
        return np.empty((0, window, matrix.shape[0]), dtype=matrix.dtype)
    starts = range(0, steps - window + 1, stride)
    return np.stack([matrix[:, s : s + window].T for s in starts])


def signal_windows(
    data: Dataset,
    window: int,
    horizon: int = 0,
    observed_nodes: Sequence[int] | None = None,
    stride: int | None = None,
    score_all: bool = False,
) -> WindowSet:
    """Windows whose targets are the signals ``horizon`` steps ahead.

    The encoder sees available entries at ``observed_nodes`` (all nodes when None);
    the loss scores available targets at the same nodes, or at every node with ``score_all``.
    """
    n, steps = data.signals.shape
    node_mask = np.zeros(n, dtype=bool)
    node_mask[np.arange(n) if observed_nodes is None else np.asarray(observed_nodes, dtype=int)] = True
    visible = data.mask & node_mask[:, None]
    usable = steps - horizon
    if usable < window:
        raise DataError(f"segment of {steps} steps is too short for window {window} and horizon {horizon}")
    cut = slice(0, usable)
    ahead = slice(horizon, horizon + usable)
    inputs = None if data.inputs is None else sliding_windows(data.inputs[:, cut], window, stride)
    return WindowSet(
        observations=sliding_windows(data.signals[:, cut], window, stride),
        targets=sliding_windows(data.signals[:, ahead], window, stride),
        obs_mask=sliding_windows(visible[:, cut], window, stride),
        target_mask=sliding_windows((data.mask if score_all else visible)[:, ahead], window, stride),
        inputs=inputs,
    )


def maybe_signal_windows(data: Dataset, window: int, **kwargs) -> WindowSet | None:
    """Like :func:`signal_windows`, but None for a segment too short to hold one window."""
    if data.steps < window + kwargs.get("horizon", 0):
        return None
    return signal_windows(data, window, **kwargs)


def tracking_windows(trajectories: Sequence[Trajectory], n: int, observed: Sequence[int], window: int) -> WindowSet:
    """Observations scattered onto all N nodes as inputs, true states x_1..x_T as targets."""
    observed = np.asarray(observed, dtype=int)
    node_mask = np.zeros(n, dtype=bool)
    node_mask[observed] = True
    obs, targets = [], []
    for traj in trajectories:
        obs.append(sliding_windows(scatter_observations(traj, n, observed), window))
        targets.append(sliding_windows(traj.states[:, 1:], window))
    observations = np.concatenate(obs)
    mask = np.broadcast_to(node_mask, observations.shape).copy()
    return WindowSet(observations=observations, targets=np.concatenate(targets), obs_mask=mask)


def scatter_observations(traj: Trajectory, n: int, observed: Sequence[int]) -> np.ndarray:
    padded = np.zeros((n, traj.steps))
    padded[np.asarray(observed, dtype=int)] = traj.observations
    return padded


@dataclass(frozen=True)
class Normalizer:
    """Global affine scaling fitted on training data."""

    mean: float
    std: float

    @classmethod
    def fit(cls, signals: np.ndarray, mask: np.ndarray | None = None) -> "Normalizer":
        values = signals if mask is None else signals[np.asarray(mask, dtype=bool)]
        if values.size == 0:
            raise DataError("no available entries to normalize on")
        std = float(np.std(values))
        return cls(float(np.mean(values)), std if std > 0 else 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean


def concat_windows(sets: Sequence[WindowSet]) -> WindowSet:
    """Stack window sets along the sample axis; optional arrays must be all present or all absent."""
    if not sets:
        raise DataError("no windows to concatenate")

    def stack(name: str):
        arrays = [getattr(s, name) for s in sets]
        if all(a is None for a in arrays):
            return None
        if any(a is None for a in arrays):
            raise DataError(f"window sets disagree on whether {name} is present")
        return np.concatenate(arrays)

    return WindowSet(
        observations=stack("observations"),
        targets=stack("targets"),
        obs_mask=stack("obs_mask"),
        target_mask=stack("target_mask"),
        inputs=stack("inputs"),
    )


def event_dataset(graph: Graph, event: Trajectory, window: int) -> Dataset:
    """Signals and inputs of one event, shifted so input column t drives signal column t + 1."""
    if event.inputs is None:
        raise DataError(f"event (seed {event.seed}) has no input signal")
    if event.observations.shape[0] != graph.n:
        raise DimensionError(
            f"input-driven events need all {graph.n} nodes observed, got {event.observations.shape[0]}"
        )
    return Dataset(
        graph=graph,
        signals=event.observations[:, :-1],
        inputs=event.inputs[:, 1:],
        split={"test": 1.0},
        window=window,
    )
