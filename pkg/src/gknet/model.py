"""GKNet: GCNN encoder/decoder around a graph-filter Kalman recursion."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..autodiff import Tensor, ops
from ..core.errors import DataError, DimensionError
from ..core.models import GateMode, Operator, Task, TransferMode, TransitionMode, parse_enum
from ..core.seeding import substream
from ..graph import Graph, IncidencePseudoInverse, incidence_pseudoinverses
from .inference import InferenceRNN, StepParams
from .kalman_module import KalmanModule, default_edge_input, edge_uncertainty, km_correct, km_predict
from .layers import GCNN

LOGGER = logging.getLogger(__name__)

# task -> (GCNN filter order, hidden widths, regularization weight)
TASK_DEFAULTS: dict[Task, tuple[int, tuple[int, ...], float]] = {
    Task.FORECASTING: (3, (16,), 0.05),
    Task.IMPUTATION: (2, (8,), 0.15),
    Task.TRACKING: (2, (16, 8), 0.025),
    Task.INPUT_DRIVEN: (2, (16,), 0.05),
}


@dataclass(frozen=True)
class GKNetConfig:
    """Architecture and loss settings; ``None`` fields take the per-task defaults."""

    task: Task = Task.TRACKING
    order: int = 2
    gcnn_order: int | None = None
    hidden: tuple[int, ...] | None = None
    lam: float | None = None
    horizon: int = 1
    gate: GateMode = GateMode.SIGMOID
    transition_mode: TransitionMode = TransitionMode.EULER
    dt: float = 0.5
    operator: Operator = Operator.NORMALIZED_LAPLACIAN
    alpha_floor: float = 1e-3

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", parse_enum(Task, self.task, "task"))
        object.__setattr__(self, "gate", parse_enum(GateMode, self.gate, "gate"))
        object.__setattr__(self, "transition_mode", parse_enum(TransitionMode, self.transition_mode, "transition_mode"))
        object.__setattr__(self, "operator", parse_enum(Operator, self.operator, "operator"))
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.alpha_floor <= 0:
            raise ValueError("alpha_floor must be > 0")
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))

    @property
    def with_inputs(self) -> bool:
        return self.task is Task.INPUT_DRIVEN

    def resolved(self) -> "GKNetConfig":
        order, hidden, lam = TASK_DEFAULTS[self.task]
        return dataclasses.replace(
            self,
            gcnn_order=order if self.gcnn_order is None else self.gcnn_order,
            hidden=hidden if self.hidden is None else self.hidden,
            lam=lam if self.lam is None else self.lam,
        )


@dataclass(eq=False)
class ForwardTrace:
    """Per-step outputs of one window; ``states[0]`` is x_0."""

    predictions: list[Tensor] = field(default_factory=list)
    states: list[Tensor] = field(default_factory=list)
    covariances: list[Tensor] = field(default_factory=list)
    params: list[StepParams] = field(default_factory=list)
    alphas: list[Tensor] = field(default_factory=list)
    drives: list[Tensor | None] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.predictions)

    def prediction_array(self) -> np.ndarray:
        """(B, T, N) predicted signals."""
        return np.stack([p.value for p in self.predictions], axis=1)

    def state_array(self) -> np.ndarray:
        """(B, T, N) corrected states x_1..x_T."""
        return np.stack([s.value for s in self.states[1:]], axis=1)


@dataclass(eq=False)
class GKNetModel:
    config: GKNetConfig
    graph: Graph
    encoder: GCNN
    decoder: GCNN
    inference: InferenceRNN
    edge_input: np.ndarray
    _floor_warned: bool = field(default=False, repr=False)

    @classmethod
    def build(cls, graph: Graph, config: GKNetConfig | None = None, seed: int = 0) -> "GKNetModel":
        config = (config or GKNetConfig()).resolved()
        graph.require_connected()
        rng = substream(seed, "init")
        hidden = tuple(config.hidden)
        encoder = GCNN.build((1,) + hidden + (2,), config.gcnn_order, rng)
        decoder = GCNN.build((1,) + hidden + (1,), config.gcnn_order, rng)
        inference = InferenceRNN.init(graph.n, config.order, rng, with_inputs=config.with_inputs, gate=config.gate)
        LOGGER.info(
            "Built GKNet for %s on n=%s m=%s (K=%s, widths=%s)",
            config.task.value, graph.n, graph.m, config.order, encoder.widths,
        )
        return cls(config, graph, encoder, decoder, inference, default_edge_input(graph))

    @cached_property
    def module(self) -> KalmanModule:
        return KalmanModule(self.graph, self.config.operator, self.config.transition_mode, self.config.dt)

    @cached_property
    def pinv(self) -> IncidencePseudoInverse:
        return incidence_pseudoinverses(self.graph, self.config.operator)

    @property
    def gcnn_operator(self):
        return self.module.laplacian

    def parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + self.decoder.parameters() + self.inference.parameters()

    def encode(self, y: Tensor) -> tuple[Tensor, Tensor]:
        """(B, N) zero-padded observations -> (state sketch x~, uncertainty sigma >= 0)."""
        if not np.all(np.isfinite(y.value)):
            raise DataError("encoder input contains non-finite values")
        out = self.encoder(ops.reshape(y, y.shape + (1,)), self.gcnn_operator)
        return out[:, :, 0], ops.softplus(out[:, :, 1])

    def infer_params(self, sigma: Tensor, hidden: Tensor, training: bool) -> StepParams:
        return self.inference.infer_params(sigma, hidden, training)

    def decode(self, x: Tensor) -> Tensor:
        out = self.decoder(ops.reshape(x, x.shape + (1,)), self.gcnn_operator)
        return out[:, :, 0]

    def head(self, x: Tensor, params: StepParams, r: Tensor | None) -> Tensor:
        """Task readout: decode the corrected state, or a forecast of it."""
        task = self.config.task
        if task is Task.FORECASTING:
            for _ in range(self.config.horizon):
                x = self.module.transition_apply(params.c, x)
        elif task is Task.INPUT_DRIVEN:
            x = self.module.transition_apply(params.c, x)
            if r is not None:
                x = ops.add(x, self.module.filter_apply(params.inputs, r))
        return self.decode(x)

    def forward(
        self,
        observations: np.ndarray,
        mask: np.ndarray | None = None,
        inputs: np.ndarray | None = None,
        training: bool = False,
    ) -> ForwardTrace:
        """Run the recurrence over a window.

        ``observations`` is (B, T, N); ``mask`` (B, T, N) or (N,) marks observed
        entries, which are the only ones the encoder sees. ``inputs`` (B, T, N)
        drives the input-filter variant: r_{t-1} enters the step-t prediction.
        """
        y_all = np.asarray(observations, dtype=float)
        if y_all.ndim != 3 or y_all.shape[2] != self.graph.n:
            raise DimensionError(f"observations must be (batch, T, {self.graph.n}), got {y_all.shape}")
        batch, steps, _ = y_all.shape
        if steps < 1:
            raise DimensionError("window length must be >= 1")
        if mask is not None:
            y_all = np.where(np.broadcast_to(np.asarray(mask, dtype=bool), y_all.shape), y_all, 0.0)
        if inputs is not None and not self.config.with_inputs:
            raise DataError(f"task {self.config.task.value} takes no input signal")
        if inputs is not None and np.shape(inputs) != y_all.shape:
            raise DimensionError(f"inputs must match observations {y_all.shape}, got {np.shape(inputs)}")

        training = training and batch >= 2
        x, p = self.module.initial_state(batch)
        hidden = self.inference.initial_hidden(batch)
        trace = ForwardTrace(states=[x], covariances=[p])
        for t in range(steps):
            x_enc, sigma = self.encode(Tensor(y_all[:, t]))
            params = self.infer_params(sigma, hidden, training)
            alpha = edge_uncertainty(params.edge, self.graph, self.edge_input)
            r_prev = Tensor(inputs[:, t - 1]) if inputs is not None and t > 0 else None
            x_pred, p_pred = km_predict(self.module, x, p, params.c, alpha, params.inputs, r_prev)
            x, p = km_correct(self.module, x_pred, p_pred, x_enc, params.gain)
            r_now = Tensor(inputs[:, t]) if inputs is not None else None
            trace.predictions.append(self.head(x, params, r_now))
            trace.states.append(x)
            trace.covariances.append(p)
            trace.params.append(params)
            trace.alphas.append(alpha)
            trace.drives.append(r_prev)
            hidden = params.hidden
        return trace

    def regularizer(self, trace: ForwardTrace, t: int) -> Tensor:
        """eps^T Q(alpha)^+ eps per batch row for step ``t`` (0-based), alpha floored."""
        params = trace.params[t]
        eps = ops.sub(trace.states[t + 1], self.module.transition_apply(params.c, trace.states[t]))
        drive = trace.drives[t]
        if drive is not None and params.inputs is not None:
            eps = ops.sub(eps, self.module.filter_apply(params.inputs, drive))
        floor = self.config.alpha_floor**2
        a = ops.hadamard(trace.alphas[t], trace.alphas[t])
        low = int(np.sum(a.value < floor))
        if low:
            log = LOGGER.debug if self._floor_warned else LOGGER.warning
            self._floor_warned = True
            log("Flooring %s edge uncertainties below %.1e at step %s", low, self.config.alpha_floor, t)
        a = ops.add(ops.relu(ops.sub(a, floor)), floor)
        return ops.precision_quadratic(eps, a, self.pinv)

    def loss(self, trace: ForwardTrace, targets: np.ndarray, target_mask: np.ndarray | None = None) -> Tensor:
        """Masked squared error plus lam * eps^T Q^+ eps, averaged over batch and time."""
        targets = np.asarray(targets, dtype=float)
        if targets.shape[:2] != (trace.predictions[0].shape[0], trace.steps):
            raise DimensionError(f"targets {targets.shape} do not match a window of {trace.steps} steps")
        weight = (
            np.ones_like(targets)
            if target_mask is None
            else np.broadcast_to(np.asarray(target_mask, dtype=float), targets.shape)
        )
        lam = float(self.config.lam)
        total = None
        for t, pred in enumerate(trace.predictions):
            err = ops.hadamard(ops.sub(pred, Tensor(targets[:, t])), Tensor(weight[:, t]))
            step = ops.sum_sq(err)
            if lam > 0:
                step = ops.add(step, ops.scale(ops.sum_all(self.regularizer(trace, t)), lam))
            total = step if total is None else ops.add(total, step)
        batch = targets.shape[0]
        return ops.scale(total, 1.0 / (batch * trace.steps))

    def predict(
        self, observations: np.ndarray, mask: np.ndarray | None = None, inputs: np.ndarray | None = None
    ) -> np.ndarray:
        """Eval-mode predictions (B, T, N) with no tape."""
        return self.forward(observations, mask, inputs, training=False).prediction_array()


def apply_transfer(
    model: GKNetModel,
    mode: TransferMode | str,
    graph: Graph | None = None,
    seed: int = 0,
) -> GKNetModel:
    """Prepare a trained model for a new graph.

    ``zero-uz`` zeroes U_z and freezes it. ``fine-tune`` keeps every block but
    reinitializes the node-sized U_in/U_out for ``graph``.
    """
    mode = parse_enum(TransferMode, mode, "transfer")
    target = graph or model.graph
    if mode is TransferMode.NONE:
        return model
    if mode is TransferMode.ZERO_UZ:
        if target.n != model.graph.n:
            raise DimensionError(
                f"zero-uz keeps U_in/U_out sized for n={model.graph.n}; use fine-tune for n={target.n}"
            )
        model.inference.zero_u_z()
    if mode is TransferMode.FINE_TUNE:
        rng = substream(seed, "transfer")
        fresh = InferenceRNN.init(
            target.n, model.config.order, rng, with_inputs=model.config.with_inputs, gate=model.config.gate
        )
        model.inference.u_in = fresh.u_in
        model.inference.u_out = fresh.u_out
    target.require_connected()
    LOGGER.info("Applied transfer mode %s for graph n=%s", mode.value, target.n)
    return GKNetModel(model.config, target, model.encoder, model.decoder, model.inference, default_edge_input(target))

