"""Full-batch Adam with bias correction."""

from __future__ import annotations

import numpy as np

from .exceptions import DivergenceError


class Adam:
    """Adam optimizer over a fixed list of numpy parameter arrays.

    Parameters are updated in place by :meth:`step`; the moment buffers are
    created lazily on the first step with the parameters' shapes.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.first_moment = None
        self.second_moment = None
        self.step_count = 0

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("params and grads must have the same length")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise DivergenceError(
                    f"non-finite gradient at step {self.step_count + 1} (lr={self.lr:g})"
                )
        if self.first_moment is None:
            self.first_moment = [np.zeros_like(p) for p in params]
            self.second_moment = [np.zeros_like(p) for p in params]

        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, grads, self.first_moment, self.second_moment):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)
        return params


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))
