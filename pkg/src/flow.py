"""
Scene flow between consecutive RGB-D frames and its colorization.

The estimator is a coarse-to-fine block matcher. At every pyramid level two
windows of integer offsets are searched per pixel, one around zero motion and
one around the rounded flow from the coarser level, each offset scored by the
mean absolute intensity difference over a square patch; the cheaper match wins.
The patch shrinks on coarse levels to at most a third of the level extent. The
best displacement is refined to sub-pixel precision with a parabola through
its neighbours unless it already matches exactly. The depth component is the
bilinearly sampled depth change along the image flow.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import cv2
import numpy as np
from scipy.ndimage import map_coordinates, uniform_filter

from .errors import ShapeError
from .sequence import RgbdFrame
from .utils.config import FlowConfig
from .utils.helpers import normalize_values, round_half_up

logger = logging.getLogger(__name__)

ZERO_MOTION_VALUE = 128
LUMA = np.array([0.299, 0.587, 0.114])
# Breaks cost ties toward the smallest displacement.
TIE_PENALTY = 1e-9
# Costs at or below this are exact matches and get no sub-pixel step.
EXACT_MATCH_COST = 1e-9
# Coarsest pyramid extent: three of the smallest patch.
MIN_LEVEL_EXTENT = 9


@dataclass
class CameraIntrinsics:
    """Pinhole intrinsics in pixels"""
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @classmethod
    def from_config(cls, config: FlowConfig, size: Tuple[int, int]) -> "CameraIntrinsics":
        height, width = size
        cx = config.cx if config.cx is not None else (width - 1) / 2.0
        cy = config.cy if config.cy is not None else (height - 1) / 2.0
        return cls(config.fx, config.fy, cx, cy)


def backproject_depth(depth: np.ndarray, intrinsics: CameraIntrinsics,
                      xs: Optional[np.ndarray] = None, ys: Optional[np.ndarray] = None) -> np.ndarray:
    """Camera-space points (3 x H x W) for a depth map, optionally at given pixel coordinates"""
    depth = np.asarray(depth, dtype=np.float64)
    if xs is None or ys is None:
        ys, xs = np.mgrid[0:depth.shape[0], 0:depth.shape[1]].astype(np.float64)
    x = (xs - intrinsics.cx) * depth / intrinsics.fx
    y = (ys - intrinsics.cy) * depth / intrinsics.fy
    return np.stack([x, y, depth])


@dataclass
class FlowField:
    """Per-pixel motion: vx, vy in pixels, vz in depth units per frame step"""
    vectors: np.ndarray  # 3 x H x W

    def __post_init__(self):
        if self.vectors.ndim != 3 or self.vectors.shape[0] != 3:
            raise ShapeError(f"flow field must be 3 x H x W, got {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("flow field contains non-finite values")

    @property
    def size(self) -> Tuple[int, int]:
        return self.vectors.shape[1], self.vectors.shape[2]

    def to_metric(self, depth_prev: np.ndarray, intrinsics: CameraIntrinsics) -> "FlowField":
        """Camera-space 3D displacement of each valid pixel"""
        depth_prev = np.asarray(depth_prev, dtype=np.float64).reshape(self.size)
        ys, xs = np.mgrid[0:self.size[0], 0:self.size[1]].astype(np.float64)
        start = backproject_depth(depth_prev, intrinsics, xs, ys)
        end = backproject_depth(depth_prev + self.vectors[2], intrinsics,
                                xs + self.vectors[0], ys + self.vectors[1])
        valid = depth_prev > 0
        return FlowField(np.where(valid[None], end - start, 0.0))


def _intensity(frame: RgbdFrame) -> np.ndarray:
    return np.tensordot(LUMA, frame.rgb, axes=([0], [0]))


def _pyramid(image: np.ndarray, levels: int):
    pyramid = [image]
    for _ in range(levels - 1):
        height, width = pyramid[-1].shape
        if min(height, width) // 2 < MIN_LEVEL_EXTENT:
            break
        pyramid.append(cv2.resize(pyramid[-1], (width // 2, height // 2), interpolation=cv2.INTER_AREA))
    return pyramid[::-1]  # coarse to fine


def _level_patch(shape: Tuple[int, int], patch: int) -> int:
    """The patch size, shrunk to an odd size no larger than a third of the smaller extent"""
    fitted = min(shape) // 3
    fitted -= 1 - fitted % 2
    return max(3, min(patch, fitted))


def _parabola_offset(minus: np.ndarray, centre: np.ndarray, plus: np.ndarray,
                     usable: np.ndarray) -> np.ndarray:
    denom = minus - 2.0 * centre + plus
    usable = usable & (denom > 0) & (centre > EXACT_MATCH_COST)
    offset = np.zeros_like(centre)
    offset[usable] = (minus[usable] - plus[usable]) / (2.0 * denom[usable])
    return np.clip(offset, -0.5, 0.5)


def _displaced(image: np.ndarray, sx: int, sy: int) -> np.ndarray:
    """image sampled at (y + sy, x + sx), clamped at the border"""
    height, width = image.shape
    rows = np.clip(np.arange(height) + sy, 0, height - 1)
    cols = np.clip(np.arange(width) + sx, 0, width - 1)
    return image[np.ix_(rows, cols)]


def _search_window(prev: np.ndarray, nxt: np.ndarray, base: np.ndarray,
                   patch: int, radius: int) -> Tuple[np.ndarray, np.ndarray]:
    """Best displacement within `radius` of each pixel's integer start, and its tie-broken cost"""
    height, width = prev.shape
    span = 2 * radius + 1
    costs = np.empty((span, span, height, width))

    # Every pixel's patch is compared under that pixel's own start.
    starts, groups = np.unique(base.reshape(2, -1).T, axis=0, return_inverse=True)
    groups = groups.reshape(height, width)
    for group, (sx, sy) in enumerate(starts):
        selected = groups == group
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                candidate = _displaced(nxt, int(sx) + dx, int(sy) + dy)
                cost = uniform_filter(np.abs(prev - candidate), size=patch, mode='nearest')
                costs[dy + radius, dx + radius][selected] = cost[selected]

    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    reach_x = base[0][None, None] + offsets[None, :, None, None]
    reach_y = base[1][None, None] + offsets[:, None, None, None]
    scored = costs + TIE_PENALTY * (reach_x ** 2 + reach_y ** 2)
    best = np.argmin(scored.reshape(span * span, height, width), axis=0)
    by, bx = np.divmod(best, span)

    flat = costs.reshape(span, span, -1)
    pixel = np.arange(height * width).reshape(height, width)

    def cost_at(iy, ix):
        return flat[np.clip(iy, 0, span - 1), np.clip(ix, 0, span - 1), pixel]

    centre = cost_at(by, bx)
    sub_x = _parabola_offset(cost_at(by, bx - 1), centre, cost_at(by, bx + 1), (bx > 0) & (bx < span - 1))
    sub_y = _parabola_offset(cost_at(by - 1, bx), centre, cost_at(by + 1, bx), (by > 0) & (by < span - 1))

    flow = np.stack([base[0] + bx - radius + sub_x, base[1] + by - radius + sub_y])
    score = np.take_along_axis(scored.reshape(span * span, height, width), best[None], axis=0)[0]
    return flow, score


def _match_level(prev: np.ndarray, nxt: np.ndarray, init: np.ndarray,
                 patch: int, radius: int) -> np.ndarray:
    """Search around a zero start and around the coarser estimate; keep the cheaper match per pixel"""
    patch = _level_patch(prev.shape, patch)
    inherited = np.rint(init).astype(np.int64)
    flow, score = _search_window(prev, nxt, np.zeros_like(inherited), patch, radius)
    if inherited.any():
        refined, refined_score = _search_window(prev, nxt, inherited, patch, radius)
        better = refined_score < score
        flow = np.where(better[None], refined, flow)
    return flow


def estimate_scene_flow(prev: RgbdFrame, nxt: RgbdFrame, intrinsics: CameraIntrinsics,
                        levels: int = 3, patch: int = 7, radius: int = 4) -> FlowField:
    """3D motion from `prev` to `nxt`; zero wherever depth is invalid in either frame"""
    if prev.size != nxt.size:
        raise ShapeError(f"frame extents differ: {prev.size} vs {nxt.size}")
    if intrinsics.fx <= 0 or intrinsics.fy <= 0:
        raise ValueError("intrinsics must have positive focal lengths")

    prev_levels = _pyramid(_intensity(prev), levels)
    next_levels = _pyramid(_intensity(nxt), levels)
    flow = np.zeros((2,) + prev_levels[0].shape)
    for prev_img, next_img in zip(prev_levels, next_levels):
        if flow.shape[1:] != prev_img.shape:
            height, width = prev_img.shape
            scale_y = height / flow.shape[1]
            scale_x = width / flow.shape[2]
            flow = np.stack([
                cv2.resize(flow[0], (width, height), interpolation=cv2.INTER_LINEAR) * scale_x,
                cv2.resize(flow[1], (width, height), interpolation=cv2.INTER_LINEAR) * scale_y,
            ])
        flow = _match_level(prev_img, next_img, flow, patch, radius)

    height, width = prev.size
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    tx, ty = xs + flow[0], ys + flow[1]
    depth_prev = prev.depth[0]
    depth_next = nxt.depth[0]
    sampled = map_coordinates(depth_next, [ty, tx], order=1, mode='nearest')
    next_valid = map_coordinates((depth_next > 0).astype(np.float64), [ty, tx], order=1, mode='nearest')
    inside = (tx >= 0) & (tx <= width - 1) & (ty >= 0) & (ty <= height - 1)
    valid = (depth_prev > 0) & (next_valid > 1.0 - 1e-9) & inside

    vectors = np.stack([flow[0], flow[1], sampled - depth_prev])
    vectors[:, ~valid] = 0.0
    return FlowField(vectors)


def colorize_flow(field: FlowField) -> np.ndarray:
    """Normalize each axis independently to 0..255; a constant axis maps to 128"""
    out = np.empty(field.vectors.shape, dtype=np.uint8)
    for axis in range(3):
        normalized = normalize_values(field.vectors[axis], degenerate=ZERO_MOTION_VALUE / 255.0)
        out[axis] = np.clip(round_half_up(255.0 * normalized), 0, 255).astype(np.uint8)
    return out


def flatten_to_2d(image: np.ndarray) -> np.ndarray:
    """2D-flow input: the depth-motion channel replaced by the zero-motion value"""
    flat = np.array(image, dtype=np.uint8, copy=True)
    flat[2] = ZERO_MOTION_VALUE
    return flat


def zero_motion_image(height: int, width: int) -> np.ndarray:
    return np.full((3, height, width), ZERO_MOTION_VALUE, dtype=np.uint8)


def to_model_input(image: np.ndarray) -> np.ndarray:
    """Scale an 8-bit colorized flow image to [0, 1] floats"""
    return np.asarray(image, dtype=np.float64) / 255.0


class SceneFlowEstimator:
    """Configured estimator producing colorized flow images"""

    def __init__(self, config: Optional[FlowConfig] = None, flow_dim: str = "3d"):
        self.config = config or FlowConfig()
        self.flow_dim = flow_dim

    def estimate(self, prev: RgbdFrame, nxt: RgbdFrame) -> FlowField:
        intrinsics = CameraIntrinsics.from_config(self.config, prev.size)
        field = estimate_scene_flow(prev, nxt, intrinsics, self.config.pyramid_levels,
                                    self.config.patch_size, self.config.search_radius)
        if self.config.space == "metric":
            field = field.to_metric(prev.depth[0], intrinsics)
        return field

    def flow_image(self, prev: RgbdFrame, nxt: RgbdFrame) -> np.ndarray:
        image = colorize_flow(self.estimate(prev, nxt))
        return flatten_to_2d(image) if self.flow_dim == "2d" else image
