"""SGD with momentum and gradient accumulation.

Gradients are summed across ``accumulation`` consecutive calls; every
k-th call applies one momentum update: v = mu * v + g_sum, p -= lr * v.
"""
from __future__ import annotations

import numpy as np

from .._validation import ValidationError


class SgdOptimizer:
    def __init__(self, lr: float, momentum: float = 0.9, accumulation: int = 1):
        if lr <= 0:
            raise ValidationError(f"lr must be positive, got {lr}")
        if not 0 <= momentum < 1:
            raise ValidationError(f"momentum must be in [0, 1), got {momentum}")
        if int(accumulation) < 1:
            raise ValidationError(f"accumulation must be >= 1, got {accumulation}")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.accumulation = int(accumulation)
        self._pending = {}
        self._velocity = {}
        self._calls = 0

    def step(self, params: dict, grads: dict) -> bool:
        """Accumulate one gradient set; returns True when weights moved."""
        for name, g in grads.items():
            slot = self._pending.setdefault(name, {})
            for key, val in g.items():
                if key in slot:
                    slot[key] += val
                else:
                    slot[key] = val.astype(np.float64, copy=True)
        self._calls += 1
        if self._calls % self.accumulation:
            return False

        for name, slot in self._pending.items():
            if name not in params:
                raise ValidationError(f"gradient for unknown parameter group {name!r}")
            vel = self._velocity.setdefault(name, {})
            for key, g_sum in slot.items():
                v = vel.get(key)
                v = g_sum if v is None else self.momentum * v + g_sum
                vel[key] = v
                p = params[name][key]
                p -= (self.lr * v).astype(p.dtype)
        self._pending = {}
        return True
