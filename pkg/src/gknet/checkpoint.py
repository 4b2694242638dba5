"""GKNet checkpoints: one JSON document with shapes, flattened weights and the config."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..autodiff import Tensor
from ..core.errors import DataError
from ..core.models import to_plain
from ..graph import Graph, read_edge_list
from .model import GKNetConfig, GKNetModel

LOGGER = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_RNN_TENSORS = ("u_in", "u_out", "u_z", "u_h", "bn_z_gamma", "bn_z_beta", "bn_h_gamma", "bn_h_beta")


def named_tensors(model: GKNetModel) -> dict[str, Tensor]:
    named: dict[str, Tensor] = {}
    for prefix, net in (("encoder", model.encoder), ("decoder", model.decoder)):
        for i, layer in enumerate(net.layers):
            named[f"{prefix}.{i}.weights"] = layer.weights
            named[f"{prefix}.{i}.bias"] = layer.bias
    for name in _RNN_TENSORS:
        named[f"inference.{name}"] = getattr(model.inference, name)
    return named


def state_arrays(model: GKNetModel) -> dict[str, np.ndarray]:
    """Copies of every weight plus the batch-norm running statistics."""
    arrays = {name: tensor.value.copy() for name, tensor in named_tensors(model).items()}
    for branch in ("bn_z", "bn_h"):
        state = getattr(model.inference, branch)
        arrays[f"inference.{branch}.running_mean"] = state.running_mean.copy()
        arrays[f"inference.{branch}.running_var"] = state.running_var.copy()
    return arrays


def load_state_arrays(model: GKNetModel, arrays: dict[str, np.ndarray]) -> None:
    """Write ``arrays`` into the model in place; shapes must match."""
    named = named_tensors(model)
    for name, tensor in named.items():
        if name not in arrays:
            raise DataError(f"checkpoint is missing tensor {name}")
        value = np.asarray(arrays[name], dtype=float)
        if value.shape != tensor.shape:
            raise DataError(f"tensor {name} has shape {value.shape}, model expects {tensor.shape}")
        tensor.value = value.copy()
    for branch in ("bn_z", "bn_h"):
        state = getattr(model.inference, branch)
        state.running_mean = np.asarray(arrays[f"inference.{branch}.running_mean"], dtype=float).copy()
        state.running_var = np.asarray(arrays[f"inference.{branch}.running_var"], dtype=float).copy()


def save_checkpoint(
    model: GKNetModel,
    path: Path | str,
    seed: int,
    graph_file: str | None = None,
    extra: dict | None = None,
) -> Path:
    path = Path(path)
    payload = {
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "graph": graph_file,
        "n": model.graph.n,
        "config": to_plain(model.config),
        "freeze_u_z": model.inference.freeze_u_z,
        "tensors": {
            name: {"shape": list(value.shape), "values": value.reshape(-1).tolist()}
            for name, value in state_arrays(model).items()
        },
    }
    if extra:
        payload["extra"] = extra
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    LOGGER.info("Wrote checkpoint to %s", path)
    return path


def _read_payload(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint not found at {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"Failed to read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("version") != CHECKPOINT_VERSION:
        found = payload.get("version") if isinstance(payload, dict) else None
        raise DataError(f"{path}: unsupported checkpoint version {found!r}")
    return payload


def checkpoint_extra(path: Path | str) -> dict:
    """The free-form ``extra`` block written alongside the weights."""
    return dict(_read_payload(Path(path)).get("extra") or {})


def load_checkpoint(path: Path | str, graph: Graph | None = None) -> GKNetModel:
    path = Path(path)
    payload = _read_payload(path)

    if graph is None:
        reference = payload.get("graph")
        if not reference:
            raise DataError(f"{path} has no graph reference; pass the graph explicitly")
        candidate = Path(reference)
        graph = read_edge_list(candidate if candidate.is_absolute() else path.parent / candidate, n=payload.get("n"))

    try:
        config = GKNetConfig(**payload["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid model config: {exc}") from exc
    model = GKNetModel.build(graph, config, seed=int(payload.get("seed", 0)))
    if payload.get("freeze_u_z"):
        model.inference.freeze_u_z = True
    arrays = {
        name: np.asarray(entry["values"], dtype=float).reshape(entry["shape"])
        for name, entry in payload["tensors"].items()
    }
    load_state_arrays(model, arrays)
    return model
