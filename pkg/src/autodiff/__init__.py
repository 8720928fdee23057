"""
Tensor substrate with reverse-mode automatic differentiation
"""

from .tensor import Graph, Tensor, backward, no_grad, record_event, trace_ops
from .functional import (
    activation,
    channel_slice,
    channel_softmax,
    concat_channels,
    conv2d,
    cross_entropy,
    global_avg_pool,
    linear,
    maxpool2x2,
    mul_broadcast_mask,
    pixelwise_cross_entropy,
    relu,
    sigmoid,
    softmax_spatial,
    tanh,
    upsample_nearest2x,
)

__all__ = [
    'Graph',
    'Tensor',
    'backward',
    'no_grad',
    'record_event',
    'trace_ops',
    'activation',
    'channel_slice',
    'channel_softmax',
    'concat_channels',
    'conv2d',
    'cross_entropy',
    'global_avg_pool',
    'linear',
    'maxpool2x2',
    'mul_broadcast_mask',
    'pixelwise_cross_entropy',
    'relu',
    'sigmoid',
    'softmax_spatial',
    'tanh',
    'upsample_nearest2x',
]
