from typing import Optional

import numpy as np

from ..autodiff import Tensor, activation, conv2d, linear, record_event
from ..optimization import xavier_init, zeros_param
from .base_layer import BaseLayer


class Conv2d(BaseLayer):
    """k x k convolution (stride 1, 'same' padding) with an optional activation"""

    def __init__(self, name: str, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, activation_kind: Optional[str] = "relu",
                 use_bias: bool = True):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = kernel_size // 2
        self.activation_kind = activation_kind
        receptive = kernel_size * kernel_size
        self.weight = self.add_param('weight', xavier_init(
            (out_channels, in_channels, kernel_size, kernel_size),
            in_channels * receptive, out_channels * receptive, rng))
        self.bias = self.add_param('bias', zeros_param((out_channels,))) if use_bias else None

    def forward(self, x: Tensor) -> Tensor:
        record_event(f"{self.scope}.conv")
        out = conv2d(x, self.weight, self.bias, stride=1, padding=self.padding)
        if self.activation_kind:
            out = activation(out, self.activation_kind)
        return out


class Linear(BaseLayer):
    """Fully connected layer with an optional activation"""

    def __init__(self, name: str, in_features: int, out_features: int,
                 rng: np.random.Generator, activation_kind: Optional[str] = "relu"):
        super().__init__(name)
        self.activation_kind = activation_kind
        self.weight = self.add_param('weight', xavier_init(
            (out_features, in_features), in_features, out_features, rng))
        self.bias = self.add_param('bias', zeros_param((out_features,)))

    def forward(self, x: Tensor) -> Tensor:
        out = linear(x, self.weight, self.bias)
        if self.activation_kind:
            out = activation(out, self.activation_kind)
        return out
