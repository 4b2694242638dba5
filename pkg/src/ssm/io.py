"""Trajectory CSV files and the JSON dataset manifest."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..core.errors import DataError
from .model import Trajectory

LOGGER = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "node", "value"]
FLOAT_FORMAT = "%.17g"


def write_matrix_csv(
    matrix: np.ndarray, path: Path | str, nodes: Sequence[int] | None = None, t0: int = 0
) -> Path:
    """Write a (nodes x time) matrix as long-format ``t,node,value`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = matrix.shape
    labels = np.arange(rows) if nodes is None else np.asarray(nodes, dtype=int)
    frame = pd.DataFrame(
        {
            "t": np.tile(np.arange(t0, t0 + cols), rows),
            "node": np.repeat(labels, cols),
            "value": matrix.reshape(-1),
        }
    )
    frame.sort_values(["t", "node"], kind="stable").to_csv(
        path, index=False, columns=CSV_COLUMNS, float_format=FLOAT_FORMAT
    )
    return path


def read_matrix_csv(path: Path | str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (node labels, time labels, nodes x time matrix) from a long-format CSV."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise DataError(f"matrix file not found at {path}") from exc
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"Failed to read {path}: {exc}") from exc
    if list(frame.columns) != CSV_COLUMNS:
        raise DataError(f"{path} must have header {','.join(CSV_COLUMNS)}, got {list(frame.columns)}")
    table = frame.pivot(index="node", columns="t", values="value")
    if table.isna().to_numpy().any():
        raise DataError(f"{path} is missing (t, node) entries")
    return table.index.to_numpy(), table.columns.to_numpy(), table.to_numpy(dtype=float)


@dataclass
class TrajectoryFiles:
    states: str
    observations: str
    split: str = "train"
    seed: int | None = None
    inputs: str | None = None


@dataclass
class DatasetManifest:
    """Shared dataset description for simulated trajectories and user-supplied signals."""

    graph: str
    trajectories: list[TrajectoryFiles] = field(default_factory=list)
    observed: list[int] | None = None
    signals: str | None = None
    inputs: str | None = None
    mask: str | None = None
    split: dict[str, float] = field(default_factory=lambda: {"train": 0.7, "validation": 0.1, "test": 0.2})
    window: int = 12
    horizon: int = 1
    root: str = field(default=".", repr=False)

    def resolve(self, relative: str) -> Path:
        candidate = Path(relative).expanduser()
        return candidate if candidate.is_absolute() else (Path(self.root) / candidate).resolve()


def write_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = asdict(manifest)
    payload.pop("root")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path: Path | str) -> DatasetManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"dataset manifest not found at {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"Failed to read manifest {path}: {exc}") from exc
    if not isinstance(payload, dict) or "graph" not in payload:
        raise DataError(f"manifest {path} must be an object with a 'graph' entry")
    known = set(DatasetManifest.__dataclass_fields__) - {"root"}
    unknown = set(payload) - known
    if unknown:
        raise DataError(f"manifest {path} has unknown keys: {', '.join(sorted(unknown))}")
    try:
        trajectories = [TrajectoryFiles(**entry) for entry in payload.pop("trajectories", [])]
    except TypeError as exc:
        raise DataError(f"manifest {path} has a malformed trajectory entry: {exc}") from exc
    return DatasetManifest(trajectories=trajectories, root=str(path.parent.resolve()), **payload)


def save_trajectory(
    traj: Trajectory, directory: Path | str, stem: str, observed: Sequence[int] | None = None
) -> TrajectoryFiles:
    directory = Path(directory)
    states = write_matrix_csv(traj.states, directory / f"{stem}_states.csv")
    observations = write_matrix_csv(traj.observations, directory / f"{stem}_observations.csv", nodes=observed, t0=1)
    inputs = None
    if traj.inputs is not None:
        inputs = write_matrix_csv(traj.inputs, directory / f"{stem}_inputs.csv", t0=1).name
    return TrajectoryFiles(states=states.name, observations=observations.name, seed=traj.seed, inputs=inputs)


def load_trajectory(manifest: DatasetManifest, entry: TrajectoryFiles) -> Trajectory:
    _, _, states = read_matrix_csv(manifest.resolve(entry.states))
    _, _, observations = read_matrix_csv(manifest.resolve(entry.observations))
    inputs = None
    if entry.inputs:
        _, _, inputs = read_matrix_csv(manifest.resolve(entry.inputs))
    try:
        return Trajectory(states=states, observations=observations, seed=entry.seed or 0, inputs=inputs)
    except ValueError as exc:
        raise DataError(f"trajectory {entry.states}: {exc}") from exc
