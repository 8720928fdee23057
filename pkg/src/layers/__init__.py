"""
Layers and composite blocks of the spatio-temporal autoencoder
"""

from .base_layer import BaseLayer, LayerParams
from .primitives import Conv2d, Linear
from .vgg_encoder import VGG_LAYOUT, VGGEncoder
from .residual_block import ResidualBlock
from .conv_lstm import ConvLSTMCell, ConvLstmState
from .decoder import Decoder, DecoderStage
from .mlp_head import MLPHead

__all__ = [
    'BaseLayer',
    'LayerParams',
    'Conv2d',
    'Linear',
    'VGG_LAYOUT',
    'VGGEncoder',
    'ResidualBlock',
    'ConvLSTMCell',
    'ConvLstmState',
    'Decoder',
    'DecoderStage',
    'MLPHead',
]
