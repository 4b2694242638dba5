"""Differentiable primitives.

Shapes follow numpy except that broadcasting is limited to adding a bias
(or a scalar) over leading axes. Graph operators, incidence matrices and
other non-Tensor arguments are constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.special as special

from ..core.errors import DimensionError, TapeError
from .tensor import Tensor, as_tensor, record


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that were broadcast to reach its shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_bias(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape == b.shape or b.ndim == 0 or a.ndim == 0:
        return
    small, big = (a, b) if a.ndim < b.ndim else (b, a)
    if big.shape[big.ndim - small.ndim:] != small.shape:
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} are not bias-compatible")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_bias(a, b, "add")
    return record(
        "add", a.value + b.value, (a, b),
        lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_bias(a, b, "sub")
    return record(
        "sub", a.value - b.value, (a, b),
        lambda g: (_reduce_to(g, a.shape), -_reduce_to(g, b.shape)),
    )


def hadamard(a, b) -> Tensor:
    """Elementwise product of equal shapes (a scalar tensor scales the other)."""
    a, b = as_tensor(a), as_tensor(b)
    _check_bias(a, b, "hadamard")
    return record(
        "hadamard", a.value * b.value, (a, b),
        lambda g: (_reduce_to(g * b.value, a.shape), _reduce_to(g * a.value, b.shape)),
    )


def scale(x, s) -> Tensor:
    """x * s for a float or a scalar tensor ``s``."""
    x, s = as_tensor(x), as_tensor(s)
    if s.ndim != 0:
        raise DimensionError(f"scale needs a scalar factor, got shape {s.shape}")
    return record(
        "scale", x.value * s.value, (x, s),
        lambda g: (g * s.value, np.sum(g * x.value)),
    )


def batch_scale(x, s) -> Tensor:
    """Scale batch element ``b`` of ``x`` (B, ...) by ``s[b]``."""
    x, s = as_tensor(x), as_tensor(s)
    if s.ndim != 1 or s.shape[0] != x.shape[0]:
        raise DimensionError(f"batch_scale needs factors of shape ({x.shape[0]},), got {s.shape}")
    expand = (slice(None),) + (None,) * (x.ndim - 1)
    return record(
        "batch_scale", x.value * s.value[expand], (x, s),
        lambda g: (g * s.value[expand], np.sum((g * x.value).reshape(x.shape[0], -1), axis=1)),
    )


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    value = a.value @ b.value

    def pullback(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _reduce_to(ga, a.shape), _reduce_to(gb, b.shape)

    return record("matmul", value, (a, b), pullback)


def matvec(m, x) -> Tensor:
    """(..., i, j) times (..., j) -> (..., i)."""
    m, x = as_tensor(m), as_tensor(x)
    if m.ndim < 2 or x.ndim < 1 or m.shape[-1] != x.shape[-1]:
        raise DimensionError(f"matvec: incompatible shapes {m.shape} and {x.shape}")
    value = np.einsum("...ij,...j->...i", m.value, x.value)

    def pullback(g):
        gm = np.einsum("...i,...j->...ij", g, x.value)
        gx = np.einsum("...ij,...i->...j", m.value, g)
        return _reduce_to(gm, m.shape), _reduce_to(gx, x.shape)

    return record("matvec", value, (m, x), pullback)


def _apply_on_axis(op, arr: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = np.asarray(op @ flat).reshape((op.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, axis)


def operator_apply(op, x, axis: int = 0) -> Tensor:
    """Apply a constant (sparse or dense) operator along ``axis`` of ``x``."""
    x = as_tensor(x)
    axis = axis % x.ndim
    if op.shape[1] != x.shape[axis]:
        raise DimensionError(f"operator of shape {op.shape} cannot act on axis {axis} of {x.shape}")
    op_t = op.T
    return record(
        "operator_apply", _apply_on_axis(op, x.value, axis), (x,),
        lambda g: (_apply_on_axis(op_t, g, axis),),
    )


def relu(x) -> Tensor:
    """max(x, 0); the pullback at 0 uses subgradient 0."""
    x = as_tensor(x)
    active = x.value > 0
    return record("relu", np.where(active, x.value, 0.0), (x,), lambda g: (g * active,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = special.expit(x.value)
    return record("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return record(
        "softplus", np.logaddexp(0.0, x.value), (x,),
        lambda g: (g * special.expit(x.value),),
    )


def sin(x) -> Tensor:
    x = as_tensor(x)
    return record("sin", np.sin(x.value), (x,), lambda g: (g * np.cos(x.value),))


def cos(x) -> Tensor:
    x = as_tensor(x)
    return record("cos", np.cos(x.value), (x,), lambda g: (-g * np.sin(x.value),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.value)
    return record("exp", y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return record("log", np.log(x.value), (x,), lambda g: (g / x.value,))


def abs_(x) -> Tensor:
    x = as_tensor(x)
    return record("abs", np.abs(x.value), (x,), lambda g: (g * np.sign(x.value),))


def transpose(x, axes: Sequence[int] | None = None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2) if x.ndim >= 2 else (0,)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record("transpose", np.transpose(x.value, axes), (x,), lambda g: (np.transpose(g, inverse),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    return record("reshape", x.value.reshape(tuple(shape)), (x,), lambda g: (g.reshape(x.shape),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def pullback(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors))
        )

    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from exc
    return record("concat", value, tensors, pullback)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def slice_(x, index) -> Tensor:
    x = as_tensor(x)

    def pullback(g):
        out = np.zeros_like(x.value)
        np.add.at(out, index, g)
        return (out,)

    return record("slice", x.value[index], (x,), pullback)


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    return record("sum_all", np.sum(x.value), (x,), lambda g: (np.full(x.shape, float(g)),))


def sum_axis(x, axis: int) -> Tensor:
    x = as_tensor(x)
    axis = axis % x.ndim
    return record(
        "sum_axis", np.sum(x.value, axis=axis), (x,),
        lambda g: (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),),
    )


def sum_sq(x) -> Tensor:
    x = as_tensor(x)
    return record("sum_sq", np.sum(x.value * x.value), (x,), lambda g: (2.0 * float(g) * x.value,))


def quadratic_form(x, m: np.ndarray) -> Tensor:
    """x^T M x over the last axis for a fixed matrix M."""
    x = as_tensor(x)
    m = np.asarray(m, dtype=float)
    if m.shape != (x.shape[-1], x.shape[-1]):
        raise DimensionError(f"quadratic_form: matrix {m.shape} does not match vectors {x.shape}")
    sym = m + m.T
    value = np.einsum("...i,ij,...j->...", x.value, m, x.value)
    return record("quadratic_form", value, (x,), lambda g: (g[..., None] * (x.value @ sym.T),))


@dataclass
class BatchNormState:
    """Running statistics for :func:`batch_norm`."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def fresh(cls, features: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNormState":
        return cls(np.zeros(features), np.ones(features), momentum, eps)


def batch_norm(x, gamma, beta, state: BatchNormState, training: bool) -> Tensor:
    """Normalize (B, F) features over the batch axis.

    Train mode uses batch statistics and updates the running averages with
    ``state.momentum``; eval mode is the fixed affine map of the running statistics.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2:
        raise DimensionError(f"batch_norm expects (batch, features), got {x.shape}")
    if not training:
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (x.value - state.running_mean) * inv_std
        return record(
            "batch_norm_eval", xhat * gamma.value + beta.value, (x, gamma, beta),
            lambda g: (g * gamma.value * inv_std, np.sum(g * xhat, axis=0), np.sum(g, axis=0)),
        )

    batch = x.shape[0]
    if batch < 2:
        raise TapeError(f"batch_norm in train mode needs a batch of at least 2, got {batch}")
    mean = x.value.mean(axis=0)
    var = x.value.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.value - mean) * inv_std
    state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mean
    state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * var * batch / (batch - 1)

    def pullback(g):
        dxhat = g * gamma.value
        dx = inv_std / batch * (
            batch * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
        )
        return dx, np.sum(g * xhat, axis=0), np.sum(g, axis=0)

    return record("batch_norm", xhat * gamma.value + beta.value, (x, gamma, beta), pullback)


def diag_congruence(b: np.ndarray, a) -> Tensor:
    """B diag(a) B^T for a fixed n x m matrix B and weights a of shape (..., m)."""
    a = as_tensor(a)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[1]:
        raise DimensionError(f"diag_congruence: {a.shape[-1]} weights for {b.shape[1]} columns")
    value = np.einsum("ie,...e,je->...ij", b, a.value, b)
    return record(
        "diag_congruence", value, (a,),
        lambda g: (np.einsum("ie,...ij,je->...e", b, g, b),),
    )


def precision_quadratic(eps, a, pinv) -> Tensor:
    """eps^T Q(a)^+ eps per batch row with Q(a) = B diag(a) B^T (``pinv`` an IncidencePseudoInverse)."""
    eps, a = as_tensor(eps), as_tensor(a)
    flow = pinv.edge_flow(eps.value, a.value)
    value = np.sum(flow * flow / a.value, axis=-1)

    def pullback(g):
        g = np.asarray(g)
        grad_eps = 2.0 * g[..., None] * ((flow / a.value) @ pinv.right_pinv)
        grad_a = -g[..., None] * (flow / a.value) ** 2
        return grad_eps, _reduce_to(grad_a, a.shape)

    return record("precision_quadratic", value, (eps, a), pullback)


def log_pdet(a, reduced) -> Tensor:
    """log pseudo-determinant of B diag(a) B^T (``reduced`` a ReducedIncidence)."""
    a = as_tensor(a)
    value = reduced.log_pdet(a.value)
    c = reduced.reduced
    inv = reduced.reduced_pinv(a.value)
    return record(
        "log_pdet", value, (a,),
        lambda g: (float(g) * np.einsum("ie,ij,je->e", c, inv, c),),
    )


def precision_trace(w, a, reduced) -> Tensor:
    """tr(Q(a)^+ W) with Q(a) = B diag(a) B^T."""
    w, a = as_tensor(w), as_tensor(a)
    q_pinv = reduced.pinv(a.value)
    value = np.sum(q_pinv * w.value.T)
    b = reduced.basis @ reduced.reduced

    def pullback(g):
        g = float(g)
        left = q_pinv @ b
        grad_a = -np.einsum("ie,ij,je->e", left, w.value, left)
        return g * q_pinv.T, g * grad_a

    return record("precision_trace", value, (w, a), pullback)
