from typing import List, Tuple

import numpy as np

from ..autodiff import Tensor, maxpool2x2
from ..errors import ShapeError
from .base_layer import BaseLayer
from .primitives import Conv2d

# (width multiplier of the base width, number of 3x3 convs) per stage;
# stages 1-3 end with a 2x2 max pool.
VGG_LAYOUT = ((1, 2), (2, 2), (4, 3), (8, 4))
POOLED_STAGES = 3


class VGGEncoder(BaseLayer):
    """11-conv VGG-style encoder downsampling by 8"""

    def __init__(self, name: str, in_channels: int, base_width: int, rng: np.random.Generator):
        super().__init__(name)
        self.stages: List[List[Conv2d]] = []
        channels = in_channels
        for stage_index, (multiplier, count) in enumerate(VGG_LAYOUT, start=1):
            width = multiplier * base_width
            stage = []
            for conv_index in range(1, count + 1):
                conv = Conv2d(f"{name}.conv{stage_index}_{conv_index}", channels, width, 3, rng)
                self.add_child(f"conv{stage_index}_{conv_index}", conv)
                stage.append(conv)
                channels = width
            self.stages.append(stage)
        self.out_channels = channels

    def forward(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        """Returns the H/8 x W/8 feature and the pre-pool activations of stages 1-3"""
        _, height, width = x.shape
        if height % 8 or width % 8:
            raise ShapeError(f"{self.name}: input extents {height}x{width} must be divisible by 8")
        skips = []
        for stage_index, stage in enumerate(self.stages):
            for conv in stage:
                x = conv(x)
            if stage_index < POOLED_STAGES:
                skips.append(x)
                x, _ = maxpool2x2(x)
        return x, skips
