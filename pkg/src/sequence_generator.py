import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import UnknownAffordanceError
from .sequence import AffordanceTaxonomy, InteractionSequence, RgbdFrame

logger = logging.getLogger(__name__)

# Candidate object kinds per affordance
OBJECT_KINDS: Dict[str, Tuple[str, ...]] = {
    'grasp': ('mug', 'pitcher', 'bottle'),
    'cut': ('knife',),
    'lift': ('box', 'pitcher'),
    'push': ('box', 'keyboard'),
    'rotate': ('jar', 'bottle'),
    'hammer': ('hammer',),
    'squeeze': ('sponge', 'bottle'),
    'paint': ('brush',),
    'type': ('keyboard',),
}

# Body outline per object kind: shape and (ry, rx) ranges in 64-px units
OBJECT_SHAPES: Dict[str, Tuple[str, Tuple[float, float], Tuple[float, float]]] = {
    'mug': ('ellipse', (7.0, 9.0), (6.0, 8.0)),
    'pitcher': ('ellipse', (8.0, 10.0), (7.0, 9.0)),
    'bottle': ('rectangle', (8.0, 10.0), (3.5, 5.0)),
    'knife': ('rectangle', (1.5, 2.5), (9.0, 12.0)),
    'box': ('rectangle', (6.0, 9.0), (8.0, 11.0)),
    'keyboard': ('rectangle', (3.5, 5.0), (11.0, 13.0)),
    'jar': ('ellipse', (6.0, 8.0), (6.0, 8.0)),
    'hammer': ('rectangle', (1.5, 2.5), (8.0, 11.0)),
    'sponge': ('rectangle', (4.0, 6.0), (6.0, 8.0)),
    'brush': ('rectangle', (1.5, 2.5), (8.0, 11.0)),
}

# Where the affordance part sits relative to the object body, (dy, dx) in body half-extents
PART_PLACEMENT: Dict[str, Tuple[float, float]] = {
    'grasp': (0.0, 1.0),
    'cut': (0.0, -1.0),
    'lift': (-1.0, 0.0),
    'push': (-1.0, 0.0),
    'rotate': (-1.0, 0.0),
    'hammer': (-1.0, 1.0),
    'squeeze': (0.0, 0.0),
    'paint': (1.0, 0.0),
    'type': (0.0, 0.0),
}

# Hand approach direction (dy, dx), post-contact motion (dy, dx, dz) and its mode
TRAJECTORIES: Dict[str, Tuple[Tuple[float, float], Tuple[float, float, float], str]] = {
    'grasp': ((0.0, -1.0), (0.0, 0.0, 0.0), 'hold'),
    'cut': ((0.0, 1.0), (0.0, 2.0, 0.0), 'oscillate'),
    'lift': ((-1.0, 0.0), (-1.0, 0.0, -0.01), 'drift'),
    'push': ((1.0, 0.0), (0.0, 0.0, 0.02), 'drift'),
    'rotate': ((1.0, 0.0), (1.0, 1.0, 0.0), 'oscillate'),
    'hammer': ((0.0, -1.0), (2.0, 0.0, 0.0), 'oscillate'),
    'squeeze': ((0.0, -1.0), (0.0, 0.0, 0.01), 'oscillate'),
    'paint': ((-1.0, 0.0), (0.0, 1.0, 0.0), 'drift'),
    'type': ((1.0, 0.0), (0.0, 0.0, 0.015), 'oscillate'),
}

# Base colour of each affordance part, jittered per sequence
PART_COLOURS: Dict[str, Tuple[float, float, float]] = {
    'grasp': (0.85, 0.25, 0.20),
    'cut': (0.75, 0.75, 0.80),
    'lift': (0.20, 0.55, 0.85),
    'push': (0.90, 0.80, 0.20),
    'rotate': (0.55, 0.25, 0.70),
    'hammer': (0.35, 0.30, 0.30),
    'squeeze': (0.30, 0.80, 0.40),
    'paint': (0.95, 0.50, 0.10),
    'type': (0.15, 0.15, 0.20),
}

HAND_COLOUR = (0.85, 0.65, 0.50)
HAND_TEXTURE_AMPLITUDE = 0.12
BACKGROUND_DEPTH = 0.8
BODY_DEPTH = 0.55
PART_DEPTH = 0.52
HAND_DEPTH = 0.45


@dataclass
class SequenceSpec:
    """What to render: the affordance, object kind and trajectory parameters"""
    affordance: str
    object_kind: Optional[str] = None
    num_frames: int = 12
    frame_size: Tuple[int, int] = (64, 64)
    fps: int = 30
    start_distance: float = 14.0  # hand-to-contact distance at frame 0, in 64-px units

    def __post_init__(self):
        if self.affordance not in OBJECT_KINDS:
            raise UnknownAffordanceError(f"unknown affordance: {self.affordance!r}")
        if self.object_kind is None:
            self.object_kind = OBJECT_KINDS[self.affordance][0]
        if self.object_kind not in OBJECT_SHAPES:
            raise ValueError(f"unknown object kind: {self.object_kind!r}")
        self.frame_size = tuple(int(v) for v in self.frame_size)
        if self.num_frames < 1:
            raise ValueError(f"num_frames must be positive, got {self.num_frames}")


def _ellipse(grid_y: np.ndarray, grid_x: np.ndarray, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    return ((grid_y - cy) / ry) ** 2 + ((grid_x - cx) / rx) ** 2 <= 1.0


def _rectangle(grid_y: np.ndarray, grid_x: np.ndarray, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    return (np.abs(grid_y - cy) <= ry) & (np.abs(grid_x - cx) <= rx)


class SequenceGenerator:
    """Render procedural hand-object interaction sequences"""

    def __init__(self, spec: SequenceSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        # (y, x) centre and depth of the hand per rendered frame
        self.hand_track: List[Tuple[float, float, float]] = []
        self.hand_masks: List[np.ndarray] = []

    def _background(self, height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
        coarse = self.rng.uniform(0.25, 0.55, size=(4, 4, 3))
        rgb = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_LINEAR)
        rgb = rgb.transpose(2, 0, 1) + self.rng.normal(0.0, 0.03, size=(3, height, width))
        ramp = np.linspace(-0.05, 0.05, height)[:, None]
        depth = np.broadcast_to(BACKGROUND_DEPTH + ramp, (height, width)).copy()
        return rgb, depth

    def generate(self) -> InteractionSequence:
        spec = self.spec
        height, width = spec.frame_size
        unit = min(height, width) / 64.0
        grid_y, grid_x = np.mgrid[0:height, 0:width].astype(np.float64)

        rgb_bg, depth_bg = self._background(height, width)

        body_cy = height / 2 + self.rng.uniform(-5, 5) * unit
        body_cx = width / 2 + self.rng.uniform(-5, 5) * unit
        outline, ry_range, rx_range = OBJECT_SHAPES[spec.object_kind]
        body_ry = self.rng.uniform(*ry_range) * unit
        body_rx = self.rng.uniform(*rx_range) * unit
        body_shape = _ellipse if outline == 'ellipse' else _rectangle
        body = body_shape(grid_y, grid_x, body_cy, body_cx, body_ry, body_rx)
        body_colour = self.rng.uniform(0.1, 0.9, size=3)

        place_y, place_x = PART_PLACEMENT[spec.affordance]
        part_ry = max(1.0, self.rng.uniform(3, 5) * unit)
        part_rx = max(1.0, self.rng.uniform(3, 5) * unit)
        part_cy = body_cy + place_y * (body_ry + part_ry * 0.5)
        part_cx = body_cx + place_x * (body_rx + part_rx * 0.5)
        part_shape = _rectangle if self.rng.random() < 0.5 else _ellipse
        part = part_shape(grid_y, grid_x, part_cy, part_cx, part_ry, part_rx)
        if not part.any():
            part[int(np.clip(round(part_cy), 0, height - 1)), int(np.clip(round(part_cx), 0, width - 1))] = True
        part_colour = np.clip(np.array(PART_COLOURS[spec.affordance]) + self.rng.uniform(-0.08, 0.08, 3), 0, 1)
        stripes = 0.08 * np.sin(grid_x * 1.3 + grid_y * 0.7)

        # static object layer
        rgb_scene = rgb_bg.copy()
        depth_scene = depth_bg.copy()
        rgb_scene[:, body] = body_colour[:, None]
        depth_scene[body] = BODY_DEPTH
        rgb_scene[:, part] = (part_colour[:, None] + stripes[part][None])
        depth_scene[part] = PART_DEPTH

        approach, motion, mode = TRAJECTORIES[spec.affordance]
        hand_r = self.rng.uniform(4, 6) * unit
        contact = np.array([part_cy, part_cx]) - np.array(approach) * (max(part_ry, part_rx) + hand_r * 0.5)
        start = contact - np.array(approach) * (spec.start_distance + self.rng.uniform(0, 4)) * unit
        hand_colour = np.clip(np.array(HAND_COLOUR) + self.rng.uniform(-0.05, 0.05, 3), 0, 1)
        texture_size = int(np.ceil(2 * hand_r)) + 8
        texture = gaussian_filter(self.rng.random((texture_size, texture_size)), 1.0)
        texture = HAND_TEXTURE_AMPLITUDE * (2.0 * (texture - texture.min()) / np.ptp(texture) - 1.0)
        contact_frame = max(1, int(round(2 * (spec.num_frames - 1) / 3)))

        frames: List[RgbdFrame] = []
        self.hand_track, self.hand_masks = [], []
        for t in range(spec.num_frames):
            hand_depth = HAND_DEPTH
            if t <= contact_frame:
                position = start + (contact - start) * (t / contact_frame)
            else:
                k = t - contact_frame
                if mode == 'oscillate':
                    phase = 1.0 if k % 2 else -1.0
                    shift = np.array(motion) * 0.5 * phase
                elif mode == 'drift':
                    shift = np.array(motion) * k
                else:
                    shift = np.zeros(3)
                position = contact + shift[:2] * unit
                hand_depth = HAND_DEPTH + shift[2]
            hand = _ellipse(grid_y, grid_x, position[0], position[1], hand_r, hand_r * 0.8)
            # texture moves rigidly with the hand
            local = [grid_y[hand] - position[0] + texture_size / 2, grid_x[hand] - position[1] + texture_size / 2]
            shading = map_coordinates(texture, local, order=1, mode='nearest')

            rgb = rgb_scene.copy()
            depth = depth_scene.copy()
            rgb[:, hand] = hand_colour[:, None] + shading[None]
            depth[hand] = hand_depth
            frames.append(RgbdFrame(np.clip(rgb, 0.0, 1.0), np.clip(depth, 0.0, 1.0)))
            self.hand_track.append((float(position[0]), float(position[1]), float(hand_depth)))
            self.hand_masks.append(hand)

        mask = np.zeros((height, width), dtype=np.int64)
        mask[part] = AffordanceTaxonomy.class_index(spec.affordance)
        action = AffordanceTaxonomy.action_for(spec.affordance)
        metadata = {
            'action': AffordanceTaxonomy.ACTIONS[action],
            'object': spec.object_kind,
            'fps': spec.fps,
            'affordance': spec.affordance,
            'seed': self.seed,
        }
        return InteractionSequence(frames, mask, action, metadata)


def generate_synthetic_sequence(spec: SequenceSpec, seed: int = 0) -> InteractionSequence:
    """Render one sequence; the same spec and seed give identical arrays"""
    return SequenceGenerator(spec, seed).generate()


def sample_specs(count: int, seed: int = 0, num_frames: int = 12,
                 frame_size: Tuple[int, int] = (64, 64), fps: int = 30) -> List[SequenceSpec]:
    """Specs drawn in shuffled blocks of every affordance, so classes stay balanced"""
    rng = np.random.default_rng(seed)
    affordances = AffordanceTaxonomy.affordances()
    specs: List[SequenceSpec] = []
    while len(specs) < count:
        for index in rng.permutation(len(affordances)):
            affordance = affordances[index]
            kinds = OBJECT_KINDS[affordance]
            kind = kinds[int(rng.integers(len(kinds)))]
            specs.append(SequenceSpec(affordance, kind, num_frames, frame_size, fps))
            if len(specs) == count:
                break
    logger.debug("Sampled %d sequence specs with seed %d", len(specs), seed)
    return specs
