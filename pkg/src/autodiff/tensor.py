"""Tensors, the recording tape and the reverse pass."""

from __future__ import annotations

import contextvars
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..core.errors import TapeError

LOGGER = logging.getLogger(__name__)

Pullback = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_CURRENT_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("current_tape", default=None)


class Tensor:
    """Dense float array with an optional gradient slot.

    Leaves are created with ``requires_grad=True``; results of primitives
    require a gradient when any input does and a tape is recording.
    """

    __slots__ = ("value", "requires_grad", "grad", "name")
    __array_priority__ = 100

    def __init__(self, value, requires_grad: bool = False, name: str | None = None) -> None:
        self.value = np.array(value, dtype=float)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def T(self) -> "Tensor":
        from .ops import transpose

        return transpose(self)

    def item(self) -> float:
        if self.value.size != 1:
            raise TapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other):
        from .ops import add

        return add(self, other)

    def __radd__(self, other):
        from .ops import add

        return add(other, self)

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __neg__(self):
        from .ops import scale

        return scale(self, -1.0)

    def __mul__(self, other):
        from .ops import hadamard, scale

        if np.isscalar(other):
            return scale(self, float(other))
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)

    def __rmatmul__(self, other):
        from .ops import matmul

        return matmul(other, self)

    def __getitem__(self, index):
        from .ops import slice_

        return slice_(self, index)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass(frozen=True, eq=False)
class Record:
    name: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    pullback: Pullback


class Tape:
    """Ordered record of primitive applications.

    Used as a context manager; while active, primitives with at least one
    gradient-requiring input are appended. A tape supports one backward pass.
    """

    def __init__(self) -> None:
        self.records: list[Record] = []
        self.consumed = False
        self._token: contextvars.Token | None = None

    def __enter__(self) -> "Tape":
        if self._token is not None:
            raise TapeError("tape is already recording")
        if self.consumed:
            raise TapeError("tape was already used for a backward pass; record on a new tape")
        self._token = _CURRENT_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _CURRENT_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, name: str, output: Tensor, inputs: tuple[Tensor, ...], pullback: Pullback) -> None:
        self.records.append(Record(name=name, output=output, inputs=inputs, pullback=pullback))


def current_tape() -> Tape | None:
    return _CURRENT_TAPE.get()


def record(name: str, value: np.ndarray, inputs: Iterable[Tensor], pullback: Pullback) -> Tensor:
    """Wrap a primitive's forward value and register its pullback on the active tape."""
    inputs = tuple(inputs)
    tape = _CURRENT_TAPE.get()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=tracked)
    if tracked:
        tape.record(name, out, inputs, pullback)
    return out


def backward(tape: Tape, output: Tensor, wrt: Sequence[Tensor] | None = None) -> list[np.ndarray] | dict:
    """Reverse pass from a scalar ``output``.

    Sets ``.grad`` on every gradient-requiring leaf reached by the tape. Returns
    the gradients of ``wrt`` in order (zeros for disconnected leaves) or, when
    ``wrt`` is None, a dict from leaf tensor to gradient.
    """
    if tape.consumed:
        raise TapeError("stale tape: backward already ran on it; re-run the forward pass")
    if tape._token is not None:
        raise TapeError("backward must run after the tape stops recording")
    if output.value.size != 1:
        raise TapeError(f"backward needs a scalar output, got shape {output.shape}")
    tape.consumed = True

    adjoints: dict[int, np.ndarray] = {id(output): np.ones_like(output.value)}
    produced = {id(rec.output) for rec in tape.records}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        grad_out = adjoints.pop(id(rec.output), None)
        if grad_out is None:
            continue
        grads = rec.pullback(grad_out)
        for tensor, grad in zip(rec.inputs, grads):
            if grad is None or not tensor.requires_grad:
                continue
            grad = np.asarray(grad, dtype=float)
            if grad.shape != tensor.shape:
                raise TapeError(f"{rec.name} pullback returned shape {grad.shape} for input {tensor.shape}")
            key = id(tensor)
            adjoints[key] = adjoints[key] + grad if key in adjoints else grad
            if key not in produced:
                leaves[key] = tensor

    if output.requires_grad and id(output) not in produced:
        leaves[id(output)] = output
    for key, tensor in leaves.items():
        tensor.grad = adjoints.get(key, np.zeros_like(tensor.value))
    LOGGER.debug("backward over %s records reached %s leaves", len(tape.records), len(leaves))

    if wrt is None:
        return {tensor: tensor.grad for tensor in leaves.values()}
    result = []
    for tensor in wrt:
        grad = adjoints.get(id(tensor)) if id(tensor) in leaves else None
        if grad is None:
            grad = np.zeros_like(tensor.value)
            tensor.grad = grad
        result.append(grad)
    return result
