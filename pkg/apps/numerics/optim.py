"""
Adam optimizer and learning-rate schedule.

Usage:
    from apps.numerics.optim import Adam, warmup_cosine_lr

    opt = Adam(model.trainable_parameters())
    for step in range(steps):
        ...
        loss.backward()
        opt.step(warmup_cosine_lr(step, steps, base_lr=3e-3))
        model.zero_grads()
"""

import math
from typing import Sequence

import numpy as np

from apps.numerics.tensor import Param


class Adam:
    """Adaptive-moment updates with bias correction."""

    def __init__(
        self,
        parameters: Sequence[Param],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.parameters = list(parameters)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

        # Moment estimates
        self.m = [np.zeros_like(p.data) for p in self.parameters]
        self.v = [np.zeros_like(p.data) for p in self.parameters]

    def step(self, lr: float = None) -> None:
        """Apply one update from the gradients currently held by each Param."""
        lr = self.lr if lr is None else lr
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for i, param in enumerate(self.parameters):
            if not param.trainable:
                continue
            g = param.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def warmup_steps(total_steps: int, warmup_frac: float = 0.05) -> int:
    if total_steps <= 0:
        return 0
    return max(1, int(math.ceil(warmup_frac * total_steps)))


def warmup_cosine_lr(step: int, total_steps: int, base_lr: float, warmup_frac: float = 0.05) -> float:
    """
    Linear warm-up over the first `warmup_frac` of steps, then cosine decay to 0.

    Args:
        step: Zero-based step index
        total_steps: Planned number of steps
        base_lr: Peak learning rate

    Returns:
        Learning rate for this step
    """
    warm = warmup_steps(total_steps, warmup_frac)
    if step < warm:
        return base_lr * (step + 1) / warm
    progress = (step - warm) / max(1, total_steps - warm)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))
