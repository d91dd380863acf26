"""Adam optimizer with bias correction, plus global-norm gradient clipping.

Nothing exotic: first/second moment accumulators per parameter tensor, the
standard bias-corrected update, and a step counter. Updates are applied in
place so every live reference to a parameter array sees the new values.
"""

from __future__ import annotations

import numpy as np


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm (handy for logging).
    """
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Adam:
    """Adam over a fixed, ordered set of named parameter tensors."""

    def __init__(self, params: list[tuple[str, np.ndarray]], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if learning_rate < 0.0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError("betas must be in [0, 1)")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._params = list(params)
        self._m = {name: np.zeros_like(arr) for name, arr in params}
        self._v = {name: np.zeros_like(arr) for name, arr in params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        """One update from a {name: gradient} mapping; missing names are an error."""
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count
        for name, param in self._params:
            g = grads[name]
            if g.shape != param.shape:
                raise ValueError(f"gradient for {name} has shape {g.shape}, expected {param.shape}")
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            param -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.epsilon)
