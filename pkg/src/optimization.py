"""
Parameter initialization, the Adam optimizer and the loss-weight schedule
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from .autodiff import Tensor
from .utils.config import TrainConfig


def xavier_init(shape: Tuple[int, ...], fan_in: int, fan_out: int,
                rng: np.random.Generator) -> Tensor:
    """Uniform Glorot initialization in +-sqrt(6 / (fan_in + fan_out))"""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got fan_in={fan_in}, fan_out={fan_out}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros_param(shape: Tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


@dataclass
class AdamMoments:
    """First and second moment estimates keyed by parameter name"""
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              moments: AdamMoments, lr: float, t: int, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, applied to `params` in place"""
    if t < 1:
        raise ValueError(f"Adam step counter starts at 1, got {t}")
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        m = moments.first.get(name)
        v = moments.second.get(name)
        if m is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        moments.first[name] = m
        moments.second[name] = v
        value -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    moments.step = t


class AdamOptimizer:
    """Adam over a fixed set of named parameter tensors"""

    def __init__(self, params: Mapping[str, Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.moments = AdamMoments()

    @classmethod
    def from_config(cls, params: Mapping[str, Tensor], config: TrainConfig) -> "AdamOptimizer":
        return cls(params, config.learning_rate, config.beta1, config.beta2, config.epsilon)

    def zero_grad(self):
        for tensor in self.params.values():
            tensor.zero_grad()

    def step(self):
        values = {name: tensor.data for name, tensor in self.params.items()}
        grads = {name: tensor.grad for name, tensor in self.params.items() if tensor.grad is not None}
        adam_step(values, grads, self.moments, self.lr, self.moments.step + 1,
                  self.beta1, self.beta2, self.eps)


def lambda_schedule(epoch: int, config: TrainConfig) -> Tuple[float, float]:
    """Loss weights (lambda1, lambda2) for a 0-based epoch"""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    pair = config.lambda_pairs[0] if epoch < config.switch_epoch else config.lambda_pairs[1]
    return float(pair[0]), float(pair[1])
