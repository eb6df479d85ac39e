"""Adam with bias correction and per-group learning rates.

The engine owns the schedule: it passes ``lr_scale = decay ** epoch`` so
the effective rate after epoch e is exactly ``base_lr * decay**e``.
"""

from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    pass


class Adam:
    def __init__(self, groups, beta1=0.9, beta2=0.999, eps=1e-8):
        """``groups`` is a list of (params, base_lr) pairs."""
        self.groups = [(list(ps), float(lr)) for ps, lr in groups]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def params(self):
        for ps, _ in self.groups:
            yield from ps

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def step(self, lr_scale=1.0, grad_scale=1.0):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for ps, base_lr in self.groups:
            lr = base_lr * lr_scale
            for p in ps:
                g = p.grad if grad_scale == 1.0 else p.grad * grad_scale
                if not np.all(np.isfinite(g)):
                    raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
                p.m += (1.0 - self.beta1) * (g - p.m)
                p.v += (1.0 - self.beta2) * (g * g - p.v)
                p.data -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + self.eps)
