"""Adam with bias correction and a cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .tensor import Tensor


@dataclass
class CosineSchedule:
    """lr(t) = lr_min + (lr_max - lr_min) (1 + cos(pi t / T)) / 2, t clamped to T.

    An optional linear warmup from 0 to lr_max over `warmup_steps` precedes
    the cosine segment (warmup_steps = 0 by default).
    """

    lr_max: float = 1e-3
    lr_min: float = 0.0
    total_steps: int = 1
    warmup_steps: int = 0

    def __post_init__(self):
        if not (self.lr_max >= self.lr_min >= 0.0):
            raise ValueError("need lr_max >= lr_min >= 0")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")

    def lr_at(self, t: int) -> float:
        if t < 0:
            raise ValueError("step must be >= 0")
        if self.warmup_steps > 0 and t < self.warmup_steps:
            return self.lr_max * (t + 1) / self.warmup_steps
        t0 = t - self.warmup_steps
        horizon = self.total_steps - self.warmup_steps
        if t0 >= horizon:
            return self.lr_min
        return self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + math.cos(math.pi * t0 / horizon))


def lr_at(schedule: CosineSchedule, t: int) -> float:
    return schedule.lr_at(t)


class Adam:
    """Standard Adam over named parameters; state is checkpointable.

    Aborts the step (raising NumericError, parameters untouched) if any
    gradient is missing or non-finite.
    """

    def __init__(self, params: list[tuple[str, Tensor]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 grad_clip: float = 0.0):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.grad_clip = grad_clip
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr: float) -> None:
        grads = {}
        for name, p in self.params:
            g = p.grad
            if g is None:
                continue  # parameter untouched this step (e.g. ablated loss term)
            if not np.isfinite(g).all():
                raise NumericError(f"adam: non-finite gradient for {name!r}; step aborted")
            grads[name] = g
        if not grads:
            raise NumericError("adam: no parameter received a gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            g = grads.get(name)
            if g is None:
                continue
            if self.grad_clip > 0.0:
                norm = float(np.linalg.norm(g))
                if norm > self.grad_clip:
                    g = g * (self.grad_clip / norm)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= lr * update

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None
