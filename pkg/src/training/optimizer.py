"""
Adam Optimizer
Updates parameter tensors in place from their accumulated gradients
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

import config
from src.tensor import Tensor


class Adam:
    """Adam with bias correction; the learning rate is passed per step"""

    def __init__(self, parameters: Sequence[Tensor],
                 betas: Tuple[float, float] = config.ADAM_BETAS,
                 eps: float = config.ADAM_EPS):
        beta1, beta2 = betas
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError(f"Adam betas must be in [0, 1), got {betas}")
        if eps <= 0:
            raise ValueError(f"Adam eps must be positive, got {eps}")
        self.parameters: List[Tensor] = list(parameters)
        self.betas = (beta1, beta2)
        self.eps = eps
        self.steps = 0
        self.first_moment = [np.zeros_like(p.values) for p in self.parameters]
        self.second_moment = [np.zeros_like(p.values) for p in self.parameters]

    def step(self, lr: float):
        """Apply one update; parameters without a gradient are left untouched"""
        self.steps += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** self.steps
        correction2 = 1.0 - beta2 ** self.steps
        for param, m, v in zip(self.parameters, self.first_moment, self.second_moment):
            if param.grad is None:
                continue
            grad = param.grad
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            update = lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.values -= update.astype(param.values.dtype, copy=False)

    def state(self) -> Dict[str, object]:
        return {"steps": self.steps,
                "first_moment": [m.copy() for m in self.first_moment],
                "second_moment": [v.copy() for v in self.second_moment]}
