"""
Differentiable operations over channel-first (C x H x W) tensors
"""

from typing import List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, logsumexp

from ..errors import LabelRangeError, ShapeError
from .tensor import Tensor


def _expect_rank(x: Tensor, rank: int, what: str):
    if x.ndim != rank:
        raise ShapeError(f"{what} must have rank {rank}, got shape {x.shape}")


def _needs(t: Optional[Tensor]) -> bool:
    return t is not None and t.requires_grad


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate a C_in x H x W input with C_out x C_in x k x k kernels"""
    _expect_rank(x, 3, "conv2d input")
    _expect_rank(weight, 4, "conv2d weight")
    c_in, height, width = x.shape
    c_out, w_in, k, kw = weight.shape
    if w_in != c_in:
        raise ShapeError(f"conv2d: weight dim 1 expects {w_in} input channels, input dim 0 has {c_in}")
    if k != kw:
        raise ShapeError(f"conv2d: kernel must be square, got {k}x{kw}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride {stride} / padding {padding}")
    if k > height + 2 * padding:
        raise ShapeError(f"conv2d: kernel height {k} exceeds padded input height {height + 2 * padding}")
    if k > width + 2 * padding:
        raise ShapeError(f"conv2d: kernel width {k} exceeds padded input width {width + 2 * padding}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias dim 0 must be {c_out}, got shape {bias.shape}")

    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    # (C_in, H', W', k, k) view; each output pixel sees one k x k window
    windows = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    out_h, out_w = windows.shape[1], windows.shape[2]
    out = np.tensordot(weight.data, windows, axes=([1, 2, 3], [0, 3, 4]))
    if bias is not None:
        out = out + bias.data[:, None, None]

    w = weight.data

    def _backward(g):
        grad_x = grad_w = grad_b = None
        if _needs(weight):
            grad_w = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
        if _needs(bias):
            grad_b = g.sum(axis=(1, 2))
        if _needs(x):
            grad_xp = np.zeros_like(xp)
            cols = np.tensordot(w, g, axes=([0], [0]))  # (C_in, k, k, H', W')
            for i in range(k):
                for j in range(k):
                    grad_xp[:, i:i + stride * (out_h - 1) + 1:stride,
                            j:j + stride * (out_w - 1) + 1:stride] += cols[:, i, j]
            grad_x = grad_xp[:, padding:padding + height, padding:padding + width]
        return grad_x, grad_w, grad_b

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, _backward, "conv2d")


def maxpool2x2(x: Tensor) -> Tuple[Tensor, np.ndarray]:
    """2x2 / stride 2 max pooling; returns the pooled tensor and window argmax"""
    _expect_rank(x, 3, "maxpool2x2 input")
    channels, height, width = x.shape
    if height % 2 or width % 2:
        raise ShapeError(f"maxpool2x2 needs even extents, got {height}x{width}")
    h, w = height // 2, width // 2
    blocks = x.data.reshape(channels, h, 2, w, 2).transpose(0, 1, 3, 2, 4).reshape(channels, h, w, 4)
    # argmax returns the first maximum, i.e. row-major within the window
    indices = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, indices[..., None], axis=-1)[..., 0]

    def _backward(g):
        grad_blocks = np.zeros((channels, h, w, 4))
        np.put_along_axis(grad_blocks, indices[..., None], g[..., None], axis=-1)
        grad = grad_blocks.reshape(channels, h, w, 2, 2).transpose(0, 1, 3, 2, 4)
        return (grad.reshape(channels, height, width),)

    return Tensor.from_op(out, (x,), _backward, "maxpool2x2"), indices


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Replicate each element into a 2x2 block"""
    _expect_rank(x, 3, "upsample_nearest2x input")
    channels, h, w = x.shape
    out = x.data.repeat(2, axis=1).repeat(2, axis=2)

    def _backward(g):
        return (g.reshape(channels, h, 2, w, 2).sum(axis=(2, 4)),)

    return Tensor.from_op(out, (x,), _backward, "upsample_nearest2x")


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementwise relu / sigmoid / tanh"""
    if kind == "relu":
        positive = x.data > 0
        return Tensor.from_op(np.where(positive, x.data, 0.0), (x,),
                              lambda g: (g * positive,), "relu")
    if kind == "sigmoid":
        s = expit(x.data)
        return Tensor.from_op(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")
    if kind == "tanh":
        t = np.tanh(x.data)
        return Tensor.from_op(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")
    raise ValueError(f"unknown activation: {kind}")


def relu(x: Tensor) -> Tensor:
    return activation(x, "relu")


def sigmoid(x: Tensor) -> Tensor:
    return activation(x, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    return activation(x, "tanh")


def softmax_spatial(x: Tensor) -> Tensor:
    """Softmax over all positions of a 1 x h x w map"""
    _expect_rank(x, 3, "softmax_spatial input")
    if x.shape[0] != 1:
        raise ShapeError(f"softmax_spatial needs a single channel, got {x.shape[0]}")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    s = e / e.sum()

    def _backward(g):
        return (s * (g - np.sum(g * s)),)

    return Tensor.from_op(s, (x,), _backward, "softmax_spatial")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack two C x h x w tensors along the channel dimension"""
    _expect_rank(a, 3, "concat_channels first input")
    _expect_rank(b, 3, "concat_channels second input")
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"concat_channels: spatial extents {a.shape[1:]} and {b.shape[1:]} differ")
    split = a.shape[0]
    out = np.concatenate([a.data, b.data], axis=0)
    return Tensor.from_op(out, (a, b), lambda g: (g[:split], g[split:]), "concat_channels")


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels [start, stop) of a C x h x w tensor"""
    _expect_rank(x, 3, "channel_slice input")
    if not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"channel_slice [{start}, {stop}) outside {x.shape[0]} channels")
    shape = x.shape

    def _backward(g):
        grad = np.zeros(shape)
        grad[start:stop] = g
        return (grad,)

    return Tensor.from_op(x.data[start:stop].copy(), (x,), _backward, "channel_slice")


def mul_broadcast_mask(mask: Tensor, x: Tensor) -> Tensor:
    """Multiply every channel of x elementwise by a 1 x h x w mask"""
    _expect_rank(mask, 3, "mask")
    _expect_rank(x, 3, "masked input")
    if mask.shape[0] != 1:
        raise ShapeError(f"mask must have one channel, got {mask.shape[0]}")
    if mask.shape[1:] != x.shape[1:]:
        raise ShapeError(f"mask extents {mask.shape[1:]} differ from input extents {x.shape[1:]}")
    m, v = mask.data, x.data

    def _backward(g):
        return np.sum(g * v, axis=0, keepdims=True), g * m

    return Tensor.from_op(m * v, (mask, x), _backward, "mul_broadcast_mask")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """weight @ x + bias for an n-vector x and an m x n weight"""
    _expect_rank(x, 1, "linear input")
    _expect_rank(weight, 2, "linear weight")
    if weight.shape[1] != x.shape[0]:
        raise ShapeError(f"linear: weight dim 1 is {weight.shape[1]}, input dim 0 is {x.shape[0]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias must have shape ({weight.shape[0]},), got {bias.shape}")
    out = weight.data @ x.data
    if bias is not None:
        out = out + bias.data
    xv, w = x.data, weight.data

    def _backward(g):
        grad_x = w.T @ g if _needs(x) else None
        grad_w = np.outer(g, xv) if _needs(weight) else None
        return grad_x, grad_w, g

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, _backward, "linear")


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over h x w for every channel"""
    _expect_rank(x, 3, "global_avg_pool input")
    channels, h, w = x.shape

    def _backward(g):
        return (np.broadcast_to(g[:, None, None] / (h * w), (channels, h, w)).copy(),)

    return Tensor.from_op(x.data.mean(axis=(1, 2)), (x,), _backward, "global_avg_pool")


def pixelwise_cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean over pixels of -log softmax_channel(logits)[target]"""
    _expect_rank(logits, 3, "segmentation logits")
    num_classes, height, width = logits.shape
    target = np.asarray(target)
    if target.shape != (height, width):
        raise ShapeError(f"target shape {target.shape} differs from logits extents {(height, width)}")
    bad = (target < 0) | (target >= num_classes)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise LabelRangeError(
            f"label {target[row, col]} at pixel ({row}, {col}) outside [0, {num_classes})")
    labels = target.astype(np.intp)
    lse = logsumexp(logits.data, axis=0)
    picked = np.take_along_axis(logits.data, labels[None], axis=0)[0]
    loss = np.mean(lse - picked)
    n_pixels = height * width

    def _backward(g):
        prob = np.exp(logits.data - lse[None])
        np.put_along_axis(prob, labels[None],
                          np.take_along_axis(prob, labels[None], axis=0) - 1.0, axis=0)
        return (prob * (float(g) / n_pixels),)

    return Tensor.from_op(np.array(loss), (logits,), _backward, "pixelwise_cross_entropy")


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """-log softmax(logits)[target] for an A-vector of logits"""
    _expect_rank(logits, 1, "classification logits")
    num_classes = logits.shape[0]
    if not 0 <= int(target) < num_classes:
        raise LabelRangeError(f"target {target} outside [0, {num_classes})")
    target = int(target)
    lse = logsumexp(logits.data)

    def _backward(g):
        prob = np.exp(logits.data - lse)
        prob[target] -= 1.0
        return (prob * float(g),)

    return Tensor.from_op(np.array(lse - logits.data[target]), (logits,), _backward, "cross_entropy")


def channel_softmax(logits: np.ndarray) -> np.ndarray:
    """Per-pixel class probabilities for plain C x H x W arrays (no graph)"""
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


__all__: List[str] = [
    "conv2d", "maxpool2x2", "upsample_nearest2x", "activation", "relu", "sigmoid", "tanh",
    "softmax_spatial", "concat_channels", "channel_slice", "mul_broadcast_mask", "linear",
    "global_avg_pool", "pixelwise_cross_entropy", "cross_entropy", "channel_softmax",
]
