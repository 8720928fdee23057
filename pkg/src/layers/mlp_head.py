import numpy as np

from ..autodiff import Tensor, global_avg_pool
from ..errors import ShapeError
from .base_layer import BaseLayer
from .primitives import Linear


class MLPHead(BaseLayer):
    """Action classifier: global average pool, then d -> d/2 -> d/4 -> A"""

    def __init__(self, name: str, channels: int, num_actions: int, rng: np.random.Generator):
        super().__init__(name)
        if channels < 4:
            raise ShapeError(f"{name}: head needs at least 4 input channels, got {channels}")
        self.fc1 = self.add_child('fc1', Linear(f"{name}.fc1", channels, channels // 2, rng))
        self.fc2 = self.add_child('fc2', Linear(f"{name}.fc2", channels // 2, channels // 4, rng))
        self.fc3 = self.add_child('fc3', Linear(f"{name}.fc3", channels // 4, num_actions, rng,
                                                activation_kind=None))

    def forward(self, x: Tensor) -> Tensor:
        pooled = global_avg_pool(x)
        return self.fc3(self.fc2(self.fc1(pooled)))
