"""Polynomial graph filters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core.errors import DimensionError
from ..core.models import Operator, parse_enum
from .graph import Graph


@dataclass(frozen=True)
class GraphFilter:
    """``sum_k coeffs[k] * Op^k`` for a graph operator ``Op``."""

    coeffs: tuple[float, ...]
    operator: Operator = Operator.LAPLACIAN

    def __post_init__(self) -> None:
        coeffs = tuple(float(h) for h in np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if not coeffs:
            raise ValueError("a graph filter needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "operator", parse_enum(Operator, self.operator, "operator"))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def identity(cls, order: int = 0, operator: Operator | str = Operator.LAPLACIAN) -> "GraphFilter":
        return cls((1.0,) + (0.0,) * order, operator)

    @classmethod
    def heat_kernel(cls, order: int = 3, operator: Operator | str = Operator.NORMALIZED_LAPLACIAN) -> "GraphFilter":
        """Truncated exp(-Op): h_k = (-1)^k / k!."""
        coeffs, fact = [], 1.0
        for k in range(order + 1):
            fact = fact * k if k else 1.0
            coeffs.append((-1.0) ** k / fact)
        return cls(tuple(coeffs), operator)

    def matrix(self, g: Graph) -> np.ndarray:
        """Dense filter matrix; meant for small graphs and oracles."""
        dim = g.m if self.operator.acts_on_edges else g.n
        return apply_filter(self, g, np.eye(dim))

    def with_coeffs(self, coeffs: Sequence[float]) -> "GraphFilter":
        return GraphFilter(tuple(coeffs), self.operator)


def apply_filter(f: GraphFilter, g: Graph, x: np.ndarray) -> np.ndarray:
    """Apply ``f`` to ``x`` (signal of shape (dim,) or stack (dim, k)) by iterated operator products."""
    op = g.operator(f.operator)
    x = np.asarray(x, dtype=float)
    dim = op.shape[0]
    if x.ndim == 0 or x.shape[0] != dim:
        raise DimensionError(f"{f.operator.value} filter expects leading dimension {dim}, got shape {x.shape}")
    out = f.coeffs[0] * x
    shifted = x
    for h in f.coeffs[1:]:
        shifted = op @ shifted
        out = out + h * shifted
    return np.asarray(out)
