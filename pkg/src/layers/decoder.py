from typing import List, Optional

import numpy as np

from ..autodiff import Tensor, concat_channels, mul_broadcast_mask, record_event, upsample_nearest2x
from ..errors import ShapeError
from .base_layer import BaseLayer
from .primitives import Conv2d


class DecoderStage(BaseLayer):
    """upsample -> conv3x3 -> [mask] -> concat skip -> conv1x1 -> conv3x3 -> conv3x3"""

    def __init__(self, name: str, in_channels: int, width: int, skip_channels: int,
                 rng: np.random.Generator):
        super().__init__(name)
        self.up_conv = self.add_child('up_conv', Conv2d(f"{name}.up_conv", in_channels, width, 3, rng))
        self.fuse = self.add_child('fuse', Conv2d(f"{name}.fuse", width + skip_channels, width, 1, rng))
        self.refine_a = self.add_child('refine_a', Conv2d(f"{name}.refine_a", width, width, 3, rng))
        self.refine_b = self.add_child('refine_b', Conv2d(f"{name}.refine_b", width, width, 3, rng))

    def forward(self, x: Tensor, skip: Tensor, mask: Optional[Tensor] = None) -> Tensor:
        record_event(f"{self.scope}.upsample")
        x = self.up_conv(upsample_nearest2x(x))
        if mask is not None:
            record_event("attention.apply")
            x = mul_broadcast_mask(mask, x)
        if x.shape[1:] != skip.shape[1:]:
            raise ShapeError(f"{self.name}: upsampled extents {x.shape[1:]} differ from skip {skip.shape[1:]}")
        x = self.fuse(concat_channels(x, skip))
        return self.refine_b(self.refine_a(x))


class Decoder(BaseLayer):
    """14-conv decoder with skip connections and multi-layer masking"""

    def __init__(self, name: str, latent_channels: int, base_width: int, num_classes: int,
                 rng: np.random.Generator):
        super().__init__(name)
        # Stage widths mirror the encoder skips at 1/4, 1/2 and full resolution.
        widths = (4 * base_width, 2 * base_width, base_width)
        self.stages: List[DecoderStage] = []
        channels = latent_channels
        for index, width in enumerate(widths, start=1):
            stage = DecoderStage(f"{name}.stage{index}", channels, width, width, rng)
            self.add_child(f"stage{index}", stage)
            self.stages.append(stage)
            channels = width
        self.head_conv = self.add_child('head_conv', Conv2d(f"{name}.head_conv", channels, channels, 3, rng))
        self.classifier = self.add_child('classifier', Conv2d(
            f"{name}.classifier", channels, num_classes, 1, rng, activation_kind=None))

    def forward(self, latent: Tensor, mask: Optional[Tensor], skips: List[Tensor]) -> Tensor:
        """Decode C x H x W logits from the latent feature and the encoder skips (full, 1/2, 1/4)"""
        if len(skips) != len(self.stages):
            raise ShapeError(f"{self.name}: expected {len(self.stages)} skips, got {len(skips)}")
        x = latent
        stage_mask = mask
        if mask is not None:
            record_event("attention.apply")
            x = mul_broadcast_mask(mask, x)
        for stage, skip in zip(self.stages, reversed(skips)):
            if stage_mask is not None:
                # nearest-neighbour copies of M, not renormalized
                stage_mask = upsample_nearest2x(stage_mask)
            x = stage(x, skip, stage_mask)
        return self.classifier(self.head_conv(x))
