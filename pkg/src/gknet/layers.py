"""Graph convolutional layers built from polynomial graph filters."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tensor, ops

LOGGER = logging.getLogger(__name__)


@dataclass(eq=False)
class GraphConvLayer:
    """y = sum_k (Op^k x) W_k + b on (batch, nodes, features) signals."""

    weights: Tensor
    bias: Tensor

    @property
    def order(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[2]

    @classmethod
    def init(cls, order: int, f_in: int, f_out: int, rng: np.random.Generator) -> "GraphConvLayer":
        bound = np.sqrt(6.0 / ((order + 1) * f_in + f_out))
        weights = rng.uniform(-bound, bound, size=(order + 1, f_in, f_out))
        return cls(Tensor(weights, requires_grad=True), Tensor(np.zeros(f_out), requires_grad=True))

    def __call__(self, x: Tensor, op) -> Tensor:
        shifted = x
        out = ops.matmul(shifted, self.weights[0])
        for k in range(1, self.order + 1):
            shifted = ops.operator_apply(op, shifted, axis=1)
            out = ops.add(out, ops.matmul(shifted, self.weights[k]))
        return ops.add(out, self.bias)


@dataclass(eq=False)
class GCNN:
    """Stack of graph convolutions with ReLU between layers and a linear last layer."""

    layers: list[GraphConvLayer]

    @classmethod
    def build(cls, widths: Sequence[int], order: int, rng: np.random.Generator) -> "GCNN":
        """``widths`` lists feature counts from input to output, e.g. (1, 16, 16, 2)."""
        if len(widths) < 2:
            raise ValueError(f"a GCNN needs at least input and output widths, got {widths}")
        layers = [GraphConvLayer.init(order, f_in, f_out, rng) for f_in, f_out in zip(widths[:-1], widths[1:])]
        return cls(layers)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.layers[0].in_features,) + tuple(layer.out_features for layer in self.layers)

    def parameters(self) -> list[Tensor]:
        params: list[Tensor] = []
        for layer in self.layers:
            params.extend([layer.weights, layer.bias])
        return params

    def __call__(self, x: Tensor, op) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x, op)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x
