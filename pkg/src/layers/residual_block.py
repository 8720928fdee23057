import numpy as np

from ..autodiff import Tensor, record_event, relu
from .base_layer import BaseLayer
from .primitives import Conv2d


class ResidualBlock(BaseLayer):
    """Pre-activation residual block: x + conv(relu(conv(relu(x))))"""

    def __init__(self, name: str, channels: int, rng: np.random.Generator):
        super().__init__(name)
        self.conv_a = self.add_child('conv_a', Conv2d(f"{name}.conv_a", channels, channels, 3, rng,
                                                      activation_kind=None))
        self.conv_b = self.add_child('conv_b', Conv2d(f"{name}.conv_b", channels, channels, 3, rng,
                                                      activation_kind=None))

    def forward(self, x: Tensor) -> Tensor:
        record_event("residual_block")
        return x + self.conv_b(relu(self.conv_a(relu(x))))
