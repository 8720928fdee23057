from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ShapeError, UnknownAffordanceError, UnknownLabelError


class AffordanceTaxonomy:
    """Stable integer encoding of affordance classes and their actions"""

    CLASSES = ('background', 'grasp', 'cut', 'lift', 'push', 'rotate',
               'hammer', 'squeeze', 'paint', 'type')
    ACTIONS = ('grasping', 'cutting', 'lifting', 'pushing', 'rotating',
               'hammering', 'squeezing', 'painting', 'typing')
    BACKGROUND = 0

    @classmethod
    def affordances(cls) -> Tuple[str, ...]:
        return cls.CLASSES[1:]

    @classmethod
    def num_classes(cls) -> int:
        return len(cls.CLASSES)

    @classmethod
    def class_index(cls, name: str) -> int:
        try:
            return cls.CLASSES.index(name)
        except ValueError:
            raise UnknownAffordanceError(f"unknown affordance: {name!r}")

    @classmethod
    def class_name(cls, index: int) -> str:
        if not 0 <= index < len(cls.CLASSES):
            raise UnknownLabelError(f"unknown label index {index}")
        return cls.CLASSES[index]

    @classmethod
    def action_index(cls, name: str) -> int:
        try:
            return cls.ACTIONS.index(name)
        except ValueError:
            raise UnknownLabelError(f"unknown action: {name!r}")

    @classmethod
    def action_for(cls, affordance: str) -> int:
        """Action label complementary to an affordance"""
        return cls.class_index(affordance) - 1

    @classmethod
    def affordance_for_action(cls, action: int) -> str:
        return cls.CLASSES[action + 1]


# Fixed colours (RGB) per affordance for overlays and palette masks; background stays black
PALETTE: Dict[str, tuple] = {
    'grasp': (144, 238, 144),   # light green
    'cut': (255, 0, 255),       # magenta
    'lift': (0, 128, 0),        # green
    'push': (0, 255, 255),      # cyan
    'rotate': (255, 0, 0),      # red
    'hammer': (0, 0, 255),      # blue
    'squeeze': (255, 255, 0),   # yellow
    'paint': (255, 165, 0),     # orange
    'type': (128, 0, 128),      # purple
}


def palette_table() -> np.ndarray:
    """C x 3 uint8 lookup table indexed by class label (row 0 is background)"""
    table = np.zeros((AffordanceTaxonomy.num_classes(), 3), dtype=np.uint8)
    for name, colour in PALETTE.items():
        table[AffordanceTaxonomy.class_index(name)] = colour
    return table


@dataclass
class RgbdFrame:
    """One registered colour + depth time step, channel first"""
    rgb: np.ndarray    # 3 x H x W in [0, 1]
    depth: np.ndarray  # 1 x H x W in [0, 1], 0 means invalid

    def __post_init__(self):
        if self.rgb.ndim != 3 or self.rgb.shape[0] != 3:
            raise ShapeError(f"rgb must be 3 x H x W, got {self.rgb.shape}")
        if self.depth.ndim == 2:
            self.depth = self.depth[None]
        if self.depth.shape != (1,) + self.rgb.shape[1:]:
            raise ShapeError(f"depth shape {self.depth.shape} does not match rgb {self.rgb.shape}")

    @property
    def size(self) -> Tuple[int, int]:
        return self.rgb.shape[1], self.rgb.shape[2]

    def stacked(self) -> np.ndarray:
        """4 x H x W appearance input"""
        return np.concatenate([self.rgb, self.depth], axis=0)


@dataclass
class InteractionSequence:
    """Ordered frames of one interaction, annotated at the last frame only"""
    frames: List[RgbdFrame]
    affordance_mask: np.ndarray  # H x W labels for the last frame
    action_label: int
    metadata: Dict[str, Any] = field(default_factory=dict)
    flow_images: Dict[int, np.ndarray] = field(default_factory=dict)  # cached 3 x H x W uint8

    def __post_init__(self):
        if not self.frames:
            raise ShapeError("an interaction sequence needs at least one frame")
        size = self.frames[0].size
        for frame in self.frames:
            if frame.size != size:
                raise ShapeError(f"frame extents {frame.size} differ from {size}")
        if self.affordance_mask.shape != size:
            raise ShapeError(f"mask extents {self.affordance_mask.shape} differ from frames {size}")

    def __len__(self):
        return len(self.frames)

    @property
    def fps(self) -> int:
        return int(self.metadata.get('fps', 30))

    def __str__(self):
        action = AffordanceTaxonomy.ACTIONS[self.action_label]
        return f"Sequence[{len(self.frames)} frames, {action}, object={self.metadata.get('object')}]"


@dataclass
class SequenceBatch:
    """Model-ready tensors for one sequence"""
    appearance: List[np.ndarray]  # per frame, 4 x H x W (3 without depth)
    flow: List[np.ndarray]        # per frame, 3 x H x W colorized flow scaled to [0, 1]
    mask: np.ndarray              # H x W labels of the last frame
    action: int
    sequence_id: Optional[str] = None

    def __post_init__(self):
        if not self.appearance:
            raise ShapeError("a sequence batch needs at least one frame")
        if len(self.flow) != len(self.appearance):
            raise ShapeError(f"{len(self.flow)} flow images for {len(self.appearance)} frames")
        size = self.appearance[0].shape[1:]
        for image in self.appearance + self.flow:
            if image.shape[1:] != size:
                raise ShapeError(f"frame extents {image.shape[1:]} differ from {size}")
        if self.mask.shape != size:
            raise ShapeError(f"mask extents {self.mask.shape} differ from frames {size}")

    def __len__(self):
        return len(self.appearance)

    @property
    def size(self) -> Tuple[int, int]:
        return self.mask.shape

    def last_frame(self, zero_motion: np.ndarray) -> "SequenceBatch":
        """Static-image view: only the annotated frame, with a zero-motion flow input"""
        return SequenceBatch([self.appearance[-1]], [zero_motion], self.mask, self.action,
                             self.sequence_id)
