"""
Spatio-temporal autoencoder for affordance segmentation.

Each frame runs through an RGB-D encoder stream and (optionally) a flow
encoder stream; the two latent features are fused by a 1x1 convolution,
refined by a residual block and two stacked convolutional LSTMs. After the
last frame a soft-attention mask is computed from the residual output and
the recurrent output, the decoder upsamples the recurrent output back to
full resolution (re-applying the mask after every upsampling) and an MLP
head predicts the interaction's action.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .autodiff import (
    Tensor,
    channel_softmax,
    concat_channels,
    cross_entropy,
    no_grad,
    pixelwise_cross_entropy,
    softmax_spatial,
)
from .errors import ConfigError, ShapeError
from .flow import to_model_input, zero_motion_image
from .layers import BaseLayer, Conv2d, ConvLSTMCell, ConvLstmState, Decoder, MLPHead, ResidualBlock, VGGEncoder
from .sequence import SequenceBatch
from .utils.config import LAMBDA_TOLERANCE, ModelConfig

logger = logging.getLogger(__name__)

LstmStates = Tuple[ConvLstmState, ConvLstmState]


@dataclass
class Prediction:
    """Per-pixel labels and confidences plus the predicted action"""
    labels: np.ndarray      # H x W, background where confidence < threshold
    confidence: np.ndarray  # H x W max class probability
    action: int
    action_probabilities: np.ndarray
    attention: Optional[np.ndarray] = None  # 1 x h x w


def check_loss_weights(lambda1: float, lambda2: float):
    for name, value in (("lambda1", lambda1), ("lambda2", lambda2)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    if abs(lambda1 + lambda2 - 1.0) > LAMBDA_TOLERANCE:
        raise ValueError(f"loss weights must add to 1, got {lambda1} + {lambda2}")


def loss_terms(seg_logits: Tensor, action_logits: Tensor, mask_target: np.ndarray,
               action_target: int, lambda1: float, lambda2: float) -> Tuple[Tensor, Tensor, Tensor]:
    """(L_total, L_seg, L_action) on the last frame"""
    check_loss_weights(lambda1, lambda2)
    seg = pixelwise_cross_entropy(seg_logits, mask_target)
    action = cross_entropy(action_logits, action_target)
    return seg * lambda1 + action * lambda2, seg, action


def total_loss(seg_logits: Tensor, action_logits: Tensor, mask_target: np.ndarray,
               action_target: int, lambda1: float, lambda2: float) -> Tensor:
    """lambda1 * pixel-wise cross-entropy + lambda2 * action cross-entropy"""
    return loss_terms(seg_logits, action_logits, mask_target, action_target, lambda1, lambda2)[0]


class AffordanceAutoencoder(BaseLayer):
    """Two-stream encoder, recurrent latent, attention-masked decoder and action head"""

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__("autoencoder")
        problems = config.validate()
        if problems:
            raise ConfigError(problems)
        self.config = config
        rng = np.random.default_rng(seed)
        b = config.base_width
        d = config.latent_channels

        self.rgbd_encoder = self.add_child('rgbd_encoder', VGGEncoder(
            "rgbd_encoder", config.appearance_channels, b, rng))
        self.flow_encoder: Optional[VGGEncoder] = None
        if config.use_flow_stream:
            self.flow_encoder = self.add_child('flow_encoder', VGGEncoder("flow_encoder", 3, b, rng))
        fused_channels = 2 * d if config.use_flow_stream else d
        self.fusion = self.add_child('fusion', Conv2d("fusion", fused_channels, d, 1, rng))
        self.residual = self.add_child('residual', ResidualBlock("residual", d, rng))
        self.convlstm1 = self.add_child('convlstm1', ConvLSTMCell("convlstm1", d, d, rng))
        self.convlstm2 = self.add_child('convlstm2', ConvLSTMCell("convlstm2", d, d, rng))
        self.attention: Optional[Conv2d] = None
        if config.use_attention:
            self.attention = self.add_child('attention', Conv2d(
                "attention", 2 * d, 1, 1, rng, activation_kind=None))
        self.decoder = self.add_child('decoder', Decoder("decoder", d, b, config.seg_channels, rng))
        self.action_head = self.add_child('action_head', MLPHead("action_head", d, config.num_actions, rng))

        logger.debug("Built %s variant=%s with %d parameters", self.name, config.variant, self.num_parameters())

    def encode_frame(self, appearance: Tensor, flow: Optional[Tensor] = None) -> Tuple[Tensor, List[Tensor]]:
        """Fused d x h x w latent of one frame and the RGB-D stream's skip activations"""
        if appearance.shape[0] != self.config.appearance_channels:
            raise ShapeError(f"appearance has {appearance.shape[0]} channels, "
                             f"expected {self.config.appearance_channels}")
        feature, skips = self.rgbd_encoder(appearance)
        if self.flow_encoder is not None:
            if flow is None:
                raise ShapeError("the flow stream needs a flow image for every frame")
            if flow.shape[1:] != appearance.shape[1:]:
                raise ShapeError(f"flow extents {flow.shape[1:]} differ from appearance {appearance.shape[1:]}")
            flow_feature, _ = self.flow_encoder(flow)
            feature = concat_channels(feature, flow_feature)
        return self.fusion(feature), skips

    def initial_states(self, height: int, width: int) -> LstmStates:
        return self.convlstm1.initial_state(height, width), self.convlstm2.initial_state(height, width)

    def latent_step(self, encoded: Tensor, states: LstmStates) -> Tuple[Tensor, Tensor, LstmStates]:
        """Residual output X, recurrent output X-bar and the updated LSTM states"""
        x = self.residual(encoded)
        h1, state1 = self.convlstm1(x, states[0])
        x_bar, state2 = self.convlstm2(h1, states[1])
        return x, x_bar, (state1, state2)

    def attention_mask(self, x: Tensor, x_bar: Tensor) -> Tensor:
        """1 x h x w excitation mask summing to one over all positions"""
        if self.attention is None:
            raise ConfigError("attention is disabled for this model")
        return softmax_spatial(self.attention(concat_channels(x, x_bar)))

    def decode(self, x_bar: Tensor, mask: Optional[Tensor], skips: List[Tensor]) -> Tensor:
        if (mask is not None) != self.config.use_attention:
            raise ValueError("an attention mask must be given exactly when attention is enabled")
        return self.decoder(x_bar, mask, skips)

    def forward_sequence(self, batch: SequenceBatch) -> Tuple[Tensor, Tensor, Optional[Tensor]]:
        """Segmentation logits (C x H x W), action logits (A) and the attention mask of the last frame"""
        if len(batch) == 0:
            raise ShapeError("cannot run the model on an empty sequence")
        states: Optional[LstmStates] = None
        x = x_bar = None
        skips: List[Tensor] = []
        for appearance, flow in zip(batch.appearance, batch.flow):
            encoded, skips = self.encode_frame(Tensor(appearance), Tensor(flow))
            if states is None:
                states = self.initial_states(*encoded.shape[1:])
            x, x_bar, states = self.latent_step(encoded, states)

        mask = self.attention_mask(x, x_bar) if self.config.use_attention else None
        seg_logits = self.decode(x_bar, mask, skips)
        action_logits = self.action_head(x_bar)
        return seg_logits, action_logits, mask

    def forward(self, batch: SequenceBatch):
        return self.forward_sequence(batch)

    def loss(self, batch: SequenceBatch, lambda1: float, lambda2: float) -> Tuple[Tensor, Tensor, Tensor]:
        seg_logits, action_logits, _ = self.forward_sequence(batch)
        return loss_terms(seg_logits, action_logits, batch.mask, batch.action, lambda1, lambda2)

    def static_view(self, batch: SequenceBatch) -> SequenceBatch:
        """The annotated frame alone, paired with the zero-motion flow image"""
        height, width = batch.size
        return batch.last_frame(to_model_input(zero_motion_image(height, width)))

    def predict(self, batch: SequenceBatch, mode: str = "video",
                confidence_threshold: float = 0.0) -> Prediction:
        """Labels for the last frame; pixels below the confidence threshold become background"""
        if mode not in ("video", "static"):
            raise ValueError(f"mode must be 'video' or 'static', got {mode!r}")
        if mode == "static":
            batch = self.static_view(batch)
        with no_grad():
            seg_logits, action_logits, mask = self.forward_sequence(batch)
        probabilities = channel_softmax(seg_logits.data)
        labels = np.argmax(probabilities, axis=0)
        confidence = np.max(probabilities, axis=0)
        labels[confidence < confidence_threshold] = 0
        action_probabilities = channel_softmax(action_logits.data[:, None, None])[:, 0, 0]
        return Prediction(
            labels=labels,
            confidence=confidence,
            action=int(np.argmax(action_probabilities)),
            action_probabilities=action_probabilities,
            attention=None if mask is None else mask.data,
        )

    def infer_static(self, appearance: np.ndarray, confidence_threshold: float = 0.75) -> Tuple[np.ndarray, np.ndarray]:
        """Label and confidence maps for a single RGB-D (or RGB) image"""
        appearance = np.asarray(appearance, dtype=np.float64)
        if appearance.ndim != 3:
            raise ShapeError(f"image must be channel-first C x H x W, got {appearance.shape}")
        if appearance.shape[0] == 4 and not self.config.use_depth:
            appearance = appearance[:3]
        height, width = appearance.shape[1:]
        if height % 8 or width % 8:
            raise ShapeError(f"image extents {height}x{width} must be divisible by 8")
        batch = SequenceBatch([appearance], [to_model_input(zero_motion_image(height, width))],
                              np.zeros((height, width), dtype=np.int64), 0)
        prediction = self.predict(batch, "video", confidence_threshold)
        return prediction.labels, prediction.confidence

    def state_arrays(self):
        """Parameter values keyed by dotted name"""
        return {name: tensor.data for name, tensor in self.named_parameters()}

    def load_arrays(self, arrays):
        params = dict(self.named_parameters())
        missing = set(params) - set(arrays)
        unexpected = set(arrays) - set(params)
        if missing or unexpected:
            raise ShapeError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, tensor in params.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise ShapeError(f"{name}: stored shape {value.shape} differs from {tensor.shape}")
            tensor.data[...] = value
