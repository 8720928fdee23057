#!/usr/bin/env python3
"""
Unit tests for layers and composite blocks
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import unittest
import numpy as np

from src.autodiff import Tensor, softmax_spatial, trace_ops
from src.autodiff.gradcheck import check_gradients, random_projection
from src.errors import ShapeError
from src.layers import (
    VGG_LAYOUT,
    Conv2d,
    ConvLSTMCell,
    ConvLstmState,
    Decoder,
    MLPHead,
    ResidualBlock,
    VGGEncoder,
)


class TestConv2dLayer(unittest.TestCase):
    """Test the convolution layer wrapper"""

    def test_same_padding_keeps_extents(self):
        rng = np.random.default_rng(0)
        conv = Conv2d("stem.conv", 3, 5, 3, rng)
        out = conv(Tensor(rng.standard_normal((3, 8, 6))))
        self.assertEqual(out.shape, (5, 8, 6))
        self.assertTrue(np.all(out.data >= 0))

    def test_parameter_names_and_zero_bias(self):
        conv = Conv2d("stem.conv", 2, 4, 3, np.random.default_rng(0))
        names = [name for name, _ in conv.named_parameters()]
        self.assertEqual(names, ["stem.conv.weight", "stem.conv.bias"])
        np.testing.assert_array_equal(conv.bias.data, np.zeros(4))

    def test_event_uses_top_level_scope(self):
        conv = Conv2d("fusion.conv", 2, 2, 1, np.random.default_rng(0))
        with trace_ops() as counts:
            conv(Tensor(np.ones((2, 2, 2))))
        self.assertEqual(counts["fusion.conv"], 1)


class TestVGGEncoder(unittest.TestCase):
    """Test the VGG-style encoder"""

    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.encoder = VGGEncoder("rgbd_encoder", 4, 2, self.rng)

    def test_layout(self):
        self.assertEqual(sum(count for _, count in VGG_LAYOUT), 11)
        self.assertEqual(self.encoder.out_channels, 16)

    def test_output_and_skip_shapes(self):
        feature, skips = self.encoder(Tensor(self.rng.random((4, 16, 24))))
        self.assertEqual(feature.shape, (16, 2, 3))
        self.assertEqual([s.shape for s in skips], [(2, 16, 24), (4, 8, 12), (8, 4, 6)])

    def test_conv_and_pool_counts(self):
        with trace_ops() as counts:
            self.encoder(Tensor(self.rng.random((4, 16, 16))))
        self.assertEqual(counts["rgbd_encoder.conv"], 11)
        self.assertEqual(counts["maxpool2x2"], 3)

    def test_rejects_extents_not_divisible_by_eight(self):
        with self.assertRaises(ShapeError):
            self.encoder(Tensor(self.rng.random((4, 12, 16))))


class TestResidualBlock(unittest.TestCase):
    """Test the residual block"""

    def test_identity_when_weights_are_zero(self):
        rng = np.random.default_rng(2)
        block = ResidualBlock("residual", 3, rng)
        for tensor in block.parameters():
            tensor.data[...] = 0.0
        x = Tensor(rng.standard_normal((3, 4, 4)))
        np.testing.assert_array_equal(block(x).data, x.data)

    def test_gradients(self):
        rng = np.random.default_rng(3)
        block = ResidualBlock("residual", 2, rng)
        x = Tensor(rng.standard_normal((2, 3, 3)), requires_grad=True)
        projection = random_projection((2, 3, 3), rng)
        errors = check_gradients(lambda: (block(x) * projection).sum(), [x, block.conv_a.weight])
        for error in errors.values():
            self.assertLess(error, 1e-4)


class TestConvLSTMCell(unittest.TestCase):
    """Test the convolutional LSTM cell"""

    def setUp(self):
        self.rng = np.random.default_rng(4)
        self.cell = ConvLSTMCell("convlstm1", 3, 2, self.rng)

    def test_zero_state_and_shapes(self):
        state = self.cell.initial_state(4, 4)
        np.testing.assert_array_equal(state.hidden.data, np.zeros((2, 4, 4)))
        hidden, new_state = self.cell(Tensor(self.rng.standard_normal((3, 4, 4))), state)
        self.assertEqual(hidden.shape, (2, 4, 4))
        self.assertIs(new_state.hidden, hidden)
        self.assertTrue(np.all(np.abs(hidden.data) < 1.0))

    def test_gate_equations(self):
        x = Tensor(self.rng.standard_normal((3, 4, 4)))
        previous = ConvLstmState(Tensor(self.rng.standard_normal((2, 4, 4))),
                                 Tensor(self.rng.standard_normal((2, 4, 4))))
        hidden, state = self.cell.step(x, previous)
        gates = self.cell.input_conv(x).data + self.cell.hidden_conv(previous.hidden).data
        sig = lambda v: 1.0 / (1.0 + np.exp(-v))
        i, f, o, g = sig(gates[0:2]), sig(gates[2:4]), sig(gates[4:6]), np.tanh(gates[6:8])
        cell = f * previous.cell.data + i * g
        np.testing.assert_allclose(state.cell.data, cell, atol=1e-12)
        np.testing.assert_allclose(hidden.data, o * np.tanh(cell), atol=1e-12)

    def test_hidden_conv_has_no_bias(self):
        names = [name for name, _ in self.cell.named_parameters()]
        self.assertIn("convlstm1.input_conv.bias", names)
        self.assertNotIn("convlstm1.hidden_conv.bias", names)

    def test_step_event(self):
        with trace_ops() as counts:
            self.cell.step(Tensor(np.zeros((3, 2, 2))), self.cell.initial_state(2, 2))
        self.assertEqual(counts["convlstm_step"], 1)

    def test_state_mismatch(self):
        with self.assertRaises(ShapeError):
            self.cell.step(Tensor(np.zeros((3, 2, 2))), self.cell.initial_state(3, 3))
        with self.assertRaises(ShapeError):
            ConvLstmState(Tensor(np.zeros((2, 2, 2))), Tensor(np.zeros((2, 3, 2))))


class TestDecoder(unittest.TestCase):
    """Test the decoder with and without attention masking"""

    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.decoder = Decoder("decoder", 16, 2, 10, self.rng)
        self.latent = Tensor(self.rng.standard_normal((16, 2, 2)))
        self.skips = [Tensor(self.rng.random((2, 16, 16))),
                      Tensor(self.rng.random((4, 8, 8))),
                      Tensor(self.rng.random((8, 4, 4)))]

    def test_logit_shape_and_counts(self):
        with trace_ops() as counts:
            logits = self.decoder(self.latent, None, self.skips)
        self.assertEqual(logits.shape, (10, 16, 16))
        self.assertEqual(counts["decoder.conv"], 14)
        self.assertEqual(counts["decoder.upsample"], 3)
        self.assertEqual(counts["attention.apply"], 0)

    def test_mask_applied_at_every_scale(self):
        mask = softmax_spatial(Tensor(self.rng.standard_normal((1, 2, 2))))
        with trace_ops() as counts:
            masked = self.decoder(self.latent, mask, self.skips)
        self.assertEqual(counts["attention.apply"], 4)
        plain = self.decoder(self.latent, None, self.skips)
        self.assertFalse(np.allclose(masked.data, plain.data))

    def test_wrong_skip_count(self):
        with self.assertRaises(ShapeError):
            self.decoder(self.latent, None, self.skips[:2])


class TestMLPHead(unittest.TestCase):
    """Test the action head"""

    def test_output_shape(self):
        rng = np.random.default_rng(6)
        head = MLPHead("action_head", 16, 9, rng)
        self.assertEqual(head(Tensor(rng.standard_normal((16, 3, 3)))).shape, (9,))
        self.assertEqual(head.fc2.weight.shape, (4, 8))

    def test_too_few_channels(self):
        with self.assertRaises(ShapeError):
            MLPHead("action_head", 2, 9, np.random.default_rng(0))


if __name__ == '__main__':
    unittest.main()
