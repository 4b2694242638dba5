"""Mini-batch training of GKNet with Adam, clipping and early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..autodiff import Adam, Tape, backward, clip_global_norm
from ..core.errors import DimensionError, TrainingAborted
from ..core.seeding import substream
from .checkpoint import load_state_arrays, state_arrays
from .model import GKNetModel

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    patience: int = 10
    clip: float = 5.0
    window: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1 or self.window < 1:
            raise ValueError("batch_size, epochs and window must be >= 1")
        if self.lr <= 0 or self.clip <= 0:
            raise ValueError("lr and clip must be > 0")


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Stacked training windows, every array (S, W, N).

    ``obs_mask`` marks what the encoder sees; ``target_mask`` what the loss scores.
    """

    observations: np.ndarray
    targets: np.ndarray
    obs_mask: np.ndarray | None = None
    target_mask: np.ndarray | None = None
    inputs: np.ndarray | None = None

    def __post_init__(self) -> None:
        shape = self.observations.shape
        if len(shape) != 3:
            raise DimensionError(f"windows must be (samples, window, nodes), got {shape}")
        for name in ("targets", "obs_mask", "target_mask", "inputs"):
            arr = getattr(self, name)
            if arr is not None and arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, observations {shape}")

    def __len__(self) -> int:
        return self.observations.shape[0]

    def take(self, index: np.ndarray) -> "WindowSet":
        def pick(arr):
            return None if arr is None else arr[index]

        return WindowSet(
            self.observations[index],
            self.targets[index],
            pick(self.obs_mask),
            pick(self.target_mask),
            pick(self.inputs),
        )


@dataclass
class LossCurves:
    train: list[float] = field(default_factory=list)
    validation: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"train": list(self.train), "validation": list(self.validation)}

    def to_frame(self) -> pd.DataFrame:
        validation = self.validation + [np.nan] * (len(self.train) - len(self.validation))
        return pd.DataFrame(
            {"epoch": np.arange(1, len(self.train) + 1), "train_loss": self.train, "validation_loss": validation}
        )

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


@dataclass
class TrainResult:
    model: GKNetModel
    curves: LossCurves
    best_epoch: int
    stopped_early: bool


def evaluate_loss(model: GKNetModel, data: WindowSet, batch_size: int = 32) -> float:
    """Mean eval-mode loss over ``data``, weighted by batch size."""
    total, count = 0.0, 0
    for start in range(0, len(data), batch_size):
        batch = data.take(np.arange(start, min(start + batch_size, len(data))))
        trace = model.forward(batch.observations, batch.obs_mask, batch.inputs, training=False)
        total += model.loss(trace, batch.targets, batch.target_mask).item() * len(batch)
        count += len(batch)
    return total / max(count, 1)


def train_step(model: GKNetModel, batch: WindowSet, optimizer: Adam, clip: float) -> tuple[float, float]:
    """One Adam step on ``batch``; returns (loss, pre-clip gradient norm)."""
    params = optimizer.params
    with Tape() as tape:
        trace = model.forward(batch.observations, batch.obs_mask, batch.inputs, training=True)
        loss = model.loss(trace, batch.targets, batch.target_mask)
    value = loss.item()
    if not np.isfinite(value):
        return value, float("nan")
    grads = backward(tape, loss, params)
    grads, norm = clip_global_norm(grads, clip)
    optimizer.step(grads)
    return value, norm


def train(
    model: GKNetModel,
    train_set: WindowSet,
    validation_set: WindowSet | None = None,
    config: TrainConfig | None = None,
) -> TrainResult:
    """Train in place and restore the parameters of the best validation epoch.

    Shuffles come from the ``shuffle/<epoch>`` substream of ``config.seed``.
    Raises TrainingAborted with the partial curves on a non-finite batch loss.
    """
    config = config or TrainConfig()
    if len(train_set) == 0:
        raise DimensionError("empty training set")
    optimizer = Adam(model.parameters(), lr=config.lr)
    curves = LossCurves()
    best_value, best_epoch, best_state = np.inf, 0, state_arrays(model)
    stale = 0
    stopped_early = False

    for epoch in range(1, config.epochs + 1):
        order = substream(config.seed, "shuffle", epoch).permutation(len(train_set))
        total = 0.0
        for batch_index, start in enumerate(range(0, len(train_set), config.batch_size)):
            batch = train_set.take(order[start : start + config.batch_size])
            value, norm = train_step(model, batch, optimizer, config.clip)
            if not np.isfinite(value):
                raise TrainingAborted(batch_index, epoch, curves.as_dict())
            LOGGER.debug("epoch %s batch %s: loss %.6g, grad norm %.3g", epoch, batch_index, value, norm)
            total += value * len(batch)
        curves.train.append(total / len(train_set))

        monitored = curves.train[-1]
        if validation_set is not None and len(validation_set):
            monitored = evaluate_loss(model, validation_set, config.batch_size)
            curves.validation.append(monitored)
        LOGGER.info(
            "Epoch %s: train loss %.6g%s",
            epoch, curves.train[-1], f", validation loss {monitored:.6g}" if curves.validation else "",
        )

        if monitored < best_value:
            best_value, best_epoch, best_state = monitored, epoch, state_arrays(model)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                LOGGER.info("Early stopping at epoch %s (best epoch %s)", epoch, best_epoch)
                stopped_early = True
                break

    load_state_arrays(model, best_state)
    return TrainResult(model=model, curves=curves, best_epoch=best_epoch, stopped_early=stopped_early)
