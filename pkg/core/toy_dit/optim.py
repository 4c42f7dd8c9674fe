"""Adam on a named parameter dict."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params[name]`` in place for every name in ``grads``; nothing else."""

        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            self._m[name], self._v[name] = m, v
            m_hat = m / (1.0 - b1**self.step_count)
            v_hat = v / (1.0 - b2**self.step_count)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
