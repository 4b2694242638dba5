"""Recurrent inference network emitting the Kalman-module parameters."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import BatchNormState, Tensor, ops
from ..core.models import GateMode, parse_enum

LOGGER = logging.getLogger(__name__)


def hidden_size(order: int, with_inputs: bool) -> int:
    """1 diffusivity + gain taps + edge taps (+ input taps)."""
    return (3 if with_inputs else 2) * (order + 1) + 1


@dataclass(frozen=True, eq=False)
class StepParams:
    """Per-step parameters unpacked from the hidden state.

    ``c`` is after softplus; ``c_raw`` is the raw slice kept for packing.
    """

    c: Tensor
    c_raw: Tensor
    gain: Tensor
    edge: Tensor
    inputs: Tensor | None
    hidden: Tensor


def unpack(hidden: Tensor, order: int, with_inputs: bool) -> tuple[Tensor, Tensor, Tensor, Tensor | None]:
    """Split (B, K~) into (c_raw (B,), gain (B, K+1), edge (B, K+1), inputs (B, K+1) or None)."""
    taps = order + 1
    if hidden.shape[-1] != hidden_size(order, with_inputs):
        raise ValueError(f"hidden state of width {hidden.shape[-1]} does not match order {order}")
    c_raw = hidden[:, 0]
    gain = hidden[:, 1 : 1 + taps]
    edge = hidden[:, 1 + taps : 1 + 2 * taps]
    inputs = hidden[:, 1 + 2 * taps : 1 + 3 * taps] if with_inputs else None
    return c_raw, gain, edge, inputs


def pack(c_raw: Tensor, gain: Tensor, edge: Tensor, inputs: Tensor | None = None) -> Tensor:
    parts = [ops.reshape(c_raw, (c_raw.shape[0], 1)), gain, edge]
    if inputs is not None:
        parts.append(inputs)
    return ops.concat(parts, axis=1)


@dataclass(eq=False)
class InferenceRNN:
    """z_t = gate(BN(U_in s_t) + U_z h_{t-1}); h^_t = ReLU(BN(U_out s_t) + U_h h_{t-1});
    h_t = z_t * h_{t-1} + (1 - z_t) * h^_t, with separate batch norms per branch."""

    u_in: Tensor
    u_out: Tensor
    u_z: Tensor
    u_h: Tensor
    bn_z_gamma: Tensor
    bn_z_beta: Tensor
    bn_h_gamma: Tensor
    bn_h_beta: Tensor
    bn_z: BatchNormState
    bn_h: BatchNormState
    order: int
    with_inputs: bool = False
    gate: GateMode = GateMode.SIGMOID
    freeze_u_z: bool = False

    def __post_init__(self) -> None:
        self.gate = parse_enum(GateMode, self.gate, "gate")

    @classmethod
    def init(
        cls,
        n: int,
        order: int,
        rng: np.random.Generator,
        with_inputs: bool = False,
        gate: GateMode | str = GateMode.SIGMOID,
    ) -> "InferenceRNN":
        width = hidden_size(order, with_inputs)
        scale_in = 1.0 / np.sqrt(n)
        scale_h = 1.0 / np.sqrt(width)

        def param(shape, scale):
            return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)

        return cls(
            u_in=param((width, n), scale_in),
            u_out=param((width, n), scale_in),
            u_z=param((width, width), scale_h),
            u_h=param((width, width), scale_h),
            bn_z_gamma=Tensor(np.ones(width), requires_grad=True),
            bn_z_beta=Tensor(np.zeros(width), requires_grad=True),
            bn_h_gamma=Tensor(np.ones(width), requires_grad=True),
            bn_h_beta=Tensor(np.zeros(width), requires_grad=True),
            bn_z=BatchNormState.fresh(width),
            bn_h=BatchNormState.fresh(width),
            order=order,
            with_inputs=with_inputs,
            gate=gate,
        )

    @property
    def width(self) -> int:
        return self.u_z.shape[0]

    @property
    def n(self) -> int:
        return self.u_in.shape[1]

    def parameters(self) -> list[Tensor]:
        params = [self.u_in, self.u_out, self.u_h]
        if not self.freeze_u_z:
            params.append(self.u_z)
        params.extend([self.bn_z_gamma, self.bn_z_beta, self.bn_h_gamma, self.bn_h_beta])
        return params

    def zero_u_z(self) -> None:
        """Transfer mode: U_z = 0 and excluded from training."""
        self.u_z = Tensor(np.zeros_like(self.u_z.value))
        self.freeze_u_z = True

    def initial_hidden(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.width)))

    def step(self, sigma: Tensor, hidden: Tensor, training: bool) -> Tensor:
        """One recurrence step on (B, N) uncertainties and (B, K~) hidden states."""
        z_pre = ops.add(
            ops.batch_norm(ops.matvec(self.u_in, sigma), self.bn_z_gamma, self.bn_z_beta, self.bn_z, training),
            ops.matvec(self.u_z, hidden),
        )
        gate = ops.sigmoid(z_pre) if self.gate is GateMode.SIGMOID else ops.relu(z_pre)
        candidate = ops.relu(
            ops.add(
                ops.batch_norm(ops.matvec(self.u_out, sigma), self.bn_h_gamma, self.bn_h_beta, self.bn_h, training),
                ops.matvec(self.u_h, hidden),
            )
        )
        # h = z * h_prev + (1 - z) * h_cand = h_cand + z * (h_prev - h_cand)
        return ops.add(candidate, ops.hadamard(gate, ops.sub(hidden, candidate)))

    def infer_params(self, sigma: Tensor, hidden: Tensor, training: bool) -> StepParams:
        new_hidden = self.step(sigma, hidden, training)
        c_raw, gain, edge, inputs = unpack(new_hidden, self.order, self.with_inputs)
        return StepParams(
            c=ops.softplus(c_raw), c_raw=c_raw, gain=gain, edge=edge, inputs=inputs, hidden=new_hidden
        )
