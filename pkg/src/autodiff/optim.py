"""Adam and global-norm gradient clipping over lists of tensors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_global_norm(grads: Sequence[np.ndarray], max_norm: float = 5.0) -> tuple[list[np.ndarray], float]:
    """Rescale all gradients together so their joint norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return [np.asarray(g) for g in grads], norm
    factor = max_norm / norm
    return [g * factor for g in grads], norm


@dataclass
class Adam:
    params: list[Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first: list[np.ndarray] = field(default_factory=list)
    second: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.first:
            self.first = [np.zeros_like(p.value) for p in self.params]
            self.second = [np.zeros_like(p.value) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for i, (param, grad) in enumerate(zip(self.params, grads)):
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * grad
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * grad * grad
            update = (self.first[i] / bias1) / (np.sqrt(self.second[i] / bias2) + self.eps)
            param.value = param.value - self.lr * update
