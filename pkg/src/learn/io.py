"""Fitted-model JSON files."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core.errors import DataError
from ..graph import Graph, GraphFilter, read_edge_list
from ..ssm.model import StateSpaceModel

LOGGER = logging.getLogger(__name__)


def model_to_dict(model: StateSpaceModel, graph_file: str | None = None, nll_trace: Sequence[float] = ()) -> dict:
    payload = {
        "c": float(model.c),
        "h": [float(v) for v in model.obs_filter.coeffs],
        "filter_operator": model.obs_filter.operator.value,
        "alpha": [float(v) for v in model.alpha],
        "sigma2": float(model.sigma2),
        "sigma0_2": float(model.sigma0_2),
        "transition_mode": model.transition_mode.value,
        "dt": float(model.dt),
        "operator": model.operator.value,
        "mask": None if model.mask is None else list(model.mask),
        "graph": graph_file,
        "n": model.n,
        "nll_trace": [float(v) for v in nll_trace],
    }
    if model.input_filter is not None:
        payload["input_filter"] = {
            "coeffs": [float(v) for v in model.input_filter.coeffs],
            "operator": model.input_filter.operator.value,
        }
    return payload


def write_fitted_model(
    model: StateSpaceModel, path: Path | str, graph_file: str | None = None, nll_trace: Sequence[float] = ()
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model, graph_file, nll_trace), indent=2) + "\n", encoding="utf-8")
    LOGGER.info("Wrote fitted model to %s", path)
    return path


def read_fitted_model(path: Path | str, graph: Graph | None = None) -> tuple[StateSpaceModel, list[float]]:
    """Load a fitted model; the graph is read from the stored reference unless given."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"fitted model not found at {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"Failed to read fitted model {path}: {exc}") from exc

    if graph is None:
        reference = payload.get("graph")
        if not reference:
            raise DataError(f"{path} has no graph reference; pass the graph explicitly")
        candidate = Path(reference)
        graph = read_edge_list(candidate if candidate.is_absolute() else path.parent / candidate, n=payload.get("n"))

    input_filter = None
    if payload.get("input_filter"):
        spec = payload["input_filter"]
        input_filter = GraphFilter(tuple(spec["coeffs"]), spec["operator"])
    try:
        model = StateSpaceModel(
            graph=graph,
            c=float(payload["c"]),
            alpha=np.asarray(payload["alpha"], dtype=float),
            obs_filter=GraphFilter(tuple(payload["h"]), payload.get("filter_operator", "laplacian")),
            sigma2=float(payload["sigma2"]),
            sigma0_2=float(payload["sigma0_2"]),
            mask=payload.get("mask"),
            transition_mode=payload.get("transition_mode", "euler"),
            dt=float(payload.get("dt", 1.0)),
            operator=payload.get("operator", "laplacian"),
            input_filter=input_filter,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path} is not a valid fitted model: {exc}") from exc
    return model, list(payload.get("nll_trace", []))
