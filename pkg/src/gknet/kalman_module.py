"""Graph-filter Kalman recursion on batched states.

States are (B, N), covariances (B, N, N); per-step parameters arrive per
batch element. Every product with the graph operator goes through
``operator_apply`` so the covariance recursion stays on the tape.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..autodiff import Tensor, ops
from ..core.errors import DimensionError
from ..core.models import Operator, TransitionMode, parse_enum
from ..graph import Graph

LOGGER = logging.getLogger(__name__)


def poly_apply(op, coeffs: Tensor, x: Tensor, axis: int = 1) -> Tensor:
    """sum_k coeffs[:, k] op^k x along ``axis``; coefficients are per batch element (B, K+1)."""
    out = ops.batch_scale(x, coeffs[:, 0])
    shifted = x
    for k in range(1, coeffs.shape[1]):
        shifted = ops.operator_apply(op, shifted, axis=axis)
        out = ops.add(out, ops.batch_scale(shifted, coeffs[:, k]))
    return out


@dataclass(eq=False)
class KalmanModule:
    """Operator context shared by every step of the recursion."""

    graph: Graph
    operator: Operator = Operator.NORMALIZED_LAPLACIAN
    transition_mode: TransitionMode = TransitionMode.EULER
    dt: float = 0.5

    def __post_init__(self) -> None:
        self.operator = parse_enum(Operator, self.operator, "operator")
        self.transition_mode = parse_enum(TransitionMode, self.transition_mode, "transition_mode")
        if self.operator.acts_on_edges:
            raise ValueError("the Kalman module needs a node operator")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return self.graph.operator(self.operator)

    @cached_property
    def dense_laplacian(self) -> np.ndarray:
        return self.laplacian.toarray()

    @cached_property
    def incidence(self) -> np.ndarray:
        return self.graph.operator_incidence(self.operator).toarray()

    def initial_state(self, batch: int) -> tuple[Tensor, Tensor]:
        """(x_0, P_0) = (0, I) for every batch element."""
        return Tensor(np.zeros((batch, self.n))), Tensor(np.broadcast_to(np.eye(self.n), (batch, self.n, self.n)))

    def filter_apply(self, coeffs: Tensor, x: Tensor, axis: int = 1) -> Tensor:
        """sum_k coeffs[:, k] L^k x along ``axis``, with per-batch coefficients (B, K+1)."""
        return poly_apply(self.laplacian, coeffs, x, axis)

    def transition_apply(self, c: Tensor, x: Tensor) -> Tensor:
        """A(c) x for (B, N) states."""
        lx = ops.operator_apply(self.laplacian, x, axis=1)
        if self.transition_mode is TransitionMode.LITERAL:
            return ops.scale(ops.batch_scale(lx, c), -1.0)
        return ops.sub(x, ops.batch_scale(lx, ops.scale(c, self.dt)))

    def transition_congruence(self, c: Tensor, p: Tensor) -> Tensor:
        """A(c) P A(c)^T for (B, N, N) covariances."""
        lp = ops.operator_apply(self.laplacian, p, axis=1)
        lpl = ops.operator_apply(self.laplacian, lp, axis=2)
        if self.transition_mode is TransitionMode.LITERAL:
            return ops.batch_scale(lpl, ops.hadamard(c, c))
        pl = ops.operator_apply(self.laplacian, p, axis=2)
        s = ops.scale(c, self.dt)
        out = ops.sub(p, ops.batch_scale(ops.add(lp, pl), s))
        return ops.add(out, ops.batch_scale(lpl, ops.hadamard(s, s)))

    def transition_matrix(self, c: float) -> np.ndarray:
        lap = self.dense_laplacian
        if self.transition_mode is TransitionMode.LITERAL:
            return -c * lap
        return np.eye(self.n) - c * self.dt * lap


def km_predict(
    module: KalmanModule,
    x_prev: Tensor,
    p_prev: Tensor,
    c: Tensor,
    alpha: Tensor,
    input_coeffs: Tensor | None = None,
    r: Tensor | None = None,
) -> tuple[Tensor, Tensor]:
    """x^- = A(c) x + H_in(L) r;  P^- = A P A^T + B diag(alpha^2) B^T."""
    x_pred = module.transition_apply(c, x_prev)
    if input_coeffs is not None and r is not None:
        x_pred = ops.add(x_pred, module.filter_apply(input_coeffs, r))
    q = ops.diag_congruence(module.incidence, ops.hadamard(alpha, alpha))
    p_pred = ops.add(module.transition_congruence(c, p_prev), q)
    return x_pred, p_pred


def km_correct(
    module: KalmanModule, x_pred: Tensor, p_pred: Tensor, x_enc: Tensor, gain_coeffs: Tensor
) -> tuple[Tensor, Tensor]:
    """x = x^- + K(x~ - x^-);  P = (I - K) P^-, symmetrized, with K = sum_k g_k L^k."""
    x = ops.add(x_pred, module.filter_apply(gain_coeffs, ops.sub(x_enc, x_pred)))
    p = ops.sub(p_pred, module.filter_apply(gain_coeffs, p_pred, axis=1))
    p = ops.scale(ops.add(p, ops.transpose(p)), 0.5)
    return x, p


def default_edge_input(graph: Graph) -> np.ndarray:
    """w = B^T d with d the degree vector."""
    return np.asarray(graph.incidence.T @ graph.degrees).ravel()


def edge_uncertainty(edge_coeffs: Tensor, graph: Graph, w) -> Tensor:
    """alpha = |sum_k e_k L1^k w| with L1 = B^T B; ``w`` is (m,) or (B, m)."""
    w = np.asarray(w.value if isinstance(w, Tensor) else w, dtype=float)
    if w.shape[-1] != graph.m:
        raise DimensionError(f"edge input has length {w.shape[-1]}, graph has {graph.m} edges")
    batch = edge_coeffs.shape[0]
    if w.ndim == 1:
        w = np.broadcast_to(w, (batch, graph.m))
    return ops.abs_(poly_apply(graph.edge_laplacian, edge_coeffs, Tensor(w)))
