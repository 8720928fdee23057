from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..autodiff import Tensor, channel_slice, record_event, sigmoid, tanh
from ..errors import ShapeError
from .base_layer import BaseLayer
from .primitives import Conv2d


@dataclass
class ConvLstmState:
    """Recurrent state of one convLSTM layer"""
    hidden: Tensor
    cell: Tensor

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise ShapeError(f"hidden {self.hidden.shape} and cell {self.cell.shape} shapes differ")

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "ConvLstmState":
        return cls(Tensor(np.zeros((channels, height, width))), Tensor(np.zeros((channels, height, width))))


class ConvLSTMCell(BaseLayer):
    """Convolutional LSTM cell with 3x3 gate convolutions.

    Gates are computed as one 4*hidden-channel convolution over the input plus
    one over the previous hidden state, split in the order i, f, o, g:

        c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
        h' = sigmoid(o) * tanh(c')
    """

    GATES = ('input', 'forget', 'output', 'candidate')

    def __init__(self, name: str, in_channels: int, hidden_channels: int, rng: np.random.Generator):
        super().__init__(name)
        self.hidden_channels = hidden_channels
        gate_channels = 4 * hidden_channels
        self.input_conv = self.add_child('input_conv', Conv2d(
            f"{name}.input_conv", in_channels, gate_channels, 3, rng, activation_kind=None))
        # hidden-to-gate convolutions carry no bias; the input side holds b_i, b_f, b_o, b_g
        self.hidden_conv = self.add_child('hidden_conv', Conv2d(
            f"{name}.hidden_conv", hidden_channels, gate_channels, 3, rng,
            activation_kind=None, use_bias=False))

    def initial_state(self, height: int, width: int) -> ConvLstmState:
        return ConvLstmState.zeros(self.hidden_channels, height, width)

    def forward(self, x: Tensor, state: ConvLstmState) -> Tuple[Tensor, ConvLstmState]:
        return self.step(x, state)

    def step(self, x: Tensor, state: ConvLstmState) -> Tuple[Tensor, ConvLstmState]:
        if x.shape[1:] != state.hidden.shape[1:]:
            raise ShapeError(f"{self.name}: input extents {x.shape[1:]} differ from state {state.hidden.shape[1:]}")
        if state.hidden.shape[0] != self.hidden_channels:
            raise ShapeError(f"{self.name}: state has {state.hidden.shape[0]} channels, "
                             f"expected {self.hidden_channels}")
        record_event("convlstm_step")
        gates = self.input_conv(x) + self.hidden_conv(state.hidden)
        d = self.hidden_channels
        i = sigmoid(channel_slice(gates, 0, d))
        f = sigmoid(channel_slice(gates, d, 2 * d))
        o = sigmoid(channel_slice(gates, 2 * d, 3 * d))
        g = tanh(channel_slice(gates, 3 * d, 4 * d))
        cell = f * state.cell + i * g
        hidden = o * tanh(cell)
        return hidden, ConvLstmState(hidden, cell)
