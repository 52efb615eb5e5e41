"""Adam on Euclidean-parameterized weights, with optional global norm clipping.

All trainable weights live in flat space (manifold points only arise through
origin exp maps), so one optimizer serves the whole model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


def clip_gradients(grads: list[np.ndarray], max_norm: float | None):
    """Scale the whole gradient list so its global L2 norm is <= max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is None or total <= max_norm or total == 0.0:
        return grads, total
    scale = max_norm / total
    return [g * scale for g in grads], total


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def init(cls, params: list[Tensor]) -> "AdamState":
        return cls(m=[np.zeros_like(p.value) for p in params],
                   v=[np.zeros_like(p.value) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, clip_norm: float | None = None) -> AdamState:
    """One in-place Adam update; returns the mutated state."""
    grads, _ = clip_gradients(grads, clip_norm)
    state.t += 1
    t = state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    """Stateful wrapper binding parameters to adam_step."""

    def __init__(self, params: list[Tensor], lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float | None = 5.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.state = AdamState.init(params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value) for p in self.params]
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2,
                  self.eps, self.clip_norm)
