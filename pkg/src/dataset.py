"""
On-disk interaction-sequence layout, its reader/writer, and preprocessing
into model-ready batches.

    <root>/<split>/<sequence_id>/
        rgb/<idx>.png     8-bit colour, idx zero-padded to 4 digits
        depth/<idx>.png   16-bit depth in millimetres
        flow/<idx>.png    8-bit colorized flow from the previous kept frame (optional)
        mask.png          8-bit palette image of taxonomy indices for the last frame
        meta.json         {"action": ..., "object": ..., "fps": ...}
"""

import json
import logging
import os
import re
from typing import Dict, Iterator, List, Optional, Tuple

import cv2
import numpy as np
from PIL import Image
from tqdm import tqdm

from .errors import DataError, FrameOrderError, MissingAnnotationError, ShapeError, UnknownLabelError
from .flow import SceneFlowEstimator, flatten_to_2d, to_model_input, zero_motion_image
from .sequence import AffordanceTaxonomy, InteractionSequence, RgbdFrame, SequenceBatch, palette_table
from .utils.config import DataConfig, FlowConfig, ModelConfig
from .utils.helpers import is_divisible_extent, round_half_up

logger = logging.getLogger(__name__)

MILLIMETRES_PER_UNIT = 1000.0
FRAME_NAME = re.compile(r"^(\d{4})\.png$")
SPLITS = ("train", "val")


def _write_png(path: str, image: np.ndarray):
    if not cv2.imwrite(path, image):
        raise DataError(f"could not write {path}")


def _read_png(path: str, flags: int) -> np.ndarray:
    image = cv2.imread(path, flags)
    if image is None:
        raise DataError(f"could not read {path}")
    return image


def _write_mask(path: str, mask: np.ndarray):
    """Taxonomy indices as a palette PNG coloured like the overlays"""
    image = Image.fromarray(mask.astype(np.uint8), mode="P")
    image.putpalette(palette_table().flatten().tolist())
    image.save(path)


def _read_mask(path: str) -> np.ndarray:
    """Label indices of a palette or grayscale PNG, without expanding the palette"""
    try:
        with Image.open(path) as image:
            mode = image.mode
            indices = np.array(image)
    except OSError as e:
        raise DataError(f"could not read {path}: {e}")
    if mode not in ("P", "L"):
        raise DataError(f"{path}: mask must be an 8-bit palette or grayscale image, got mode {mode}")
    return indices


def _to_bgr8(image: np.ndarray) -> np.ndarray:
    """3 x H x W in [0, 1] (or uint8) -> H x W x 3 BGR uint8"""
    if image.dtype != np.uint8:
        image = np.clip(round_half_up(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(image.transpose(1, 2, 0)[:, :, ::-1])


def _from_bgr8(image: np.ndarray) -> np.ndarray:
    """H x W x 3 BGR uint8 -> 3 x H x W RGB uint8"""
    return np.ascontiguousarray(image[:, :, ::-1].transpose(2, 0, 1))


def save_sequence(sequence: InteractionSequence, directory: str, depth_max_range: float = 4.5):
    """Write a sequence in the dataset layout"""
    for sub in ("rgb", "depth"):
        os.makedirs(os.path.join(directory, sub), exist_ok=True)
    for index, frame in enumerate(sequence.frames):
        name = f"{index:04d}.png"
        _write_png(os.path.join(directory, "rgb", name), _to_bgr8(frame.rgb))
        millimetres = round_half_up(frame.depth[0] * depth_max_range * MILLIMETRES_PER_UNIT)
        _write_png(os.path.join(directory, "depth", name), np.clip(millimetres, 0, 65535).astype(np.uint16))
    if sequence.flow_images:
        os.makedirs(os.path.join(directory, "flow"), exist_ok=True)
        for index, image in sequence.flow_images.items():
            _write_png(os.path.join(directory, "flow", f"{index:04d}.png"), _to_bgr8(image))
    _write_mask(os.path.join(directory, "mask.png"), sequence.affordance_mask)
    meta = {
        "action": AffordanceTaxonomy.ACTIONS[sequence.action_label],
        "object": sequence.metadata.get("object"),
        "fps": sequence.fps,
    }
    with open(os.path.join(directory, "meta.json"), "w") as f:
        json.dump(meta, f, indent=2)


def _indexed_files(directory: str) -> List[Tuple[int, str]]:
    """Frame files sorted by index; indices must run 0, 1, 2, ..."""
    if not os.path.isdir(directory):
        raise DataError(f"frame directory {directory} not found")
    entries = []
    for name in os.listdir(directory):
        match = FRAME_NAME.match(name)
        if match is None:
            if name.endswith(".png"):
                raise FrameOrderError(f"{os.path.join(directory, name)}: frame names must be 4-digit indices")
            continue
        entries.append((int(match.group(1)), os.path.join(directory, name)))
    entries.sort()
    for expected, (index, path) in enumerate(entries):
        if index != expected:
            raise FrameOrderError(f"{directory}: expected frame {expected:04d}, found {index:04d}")
    return entries


def load_sequence(path: str, depth_max_range: float = 4.5,
                  num_classes: int = AffordanceTaxonomy.num_classes()) -> InteractionSequence:
    """Read one sequence directory; RGB is resized to the depth resolution"""
    if not os.path.isdir(path):
        raise DataError(f"sequence directory {path} not found")
    mask_path = os.path.join(path, "mask.png")
    if not os.path.exists(mask_path):
        raise MissingAnnotationError(f"{path}: missing annotation mask.png")
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        raise DataError(f"{path}: missing meta.json")
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{meta_path}: {e}")
    action = AffordanceTaxonomy.action_index(meta.get("action"))

    rgb_files = _indexed_files(os.path.join(path, "rgb"))
    depth_files = _indexed_files(os.path.join(path, "depth"))
    if not rgb_files:
        raise DataError(f"{path}: no frames")
    if len(rgb_files) != len(depth_files):
        raise FrameOrderError(f"{path}: {len(rgb_files)} rgb frames but {len(depth_files)} depth frames")

    frames = []
    for (_, rgb_path), (_, depth_path) in zip(rgb_files, depth_files):
        depth_mm = _read_png(depth_path, cv2.IMREAD_UNCHANGED)
        if depth_mm.ndim == 3:
            depth_mm = depth_mm[:, :, 0]
        height, width = depth_mm.shape
        bgr = _read_png(rgb_path, cv2.IMREAD_COLOR)
        if bgr.shape[:2] != (height, width):
            bgr = cv2.resize(bgr, (width, height), interpolation=cv2.INTER_LINEAR)
        depth = depth_mm.astype(np.float64) / (depth_max_range * MILLIMETRES_PER_UNIT)
        frames.append(RgbdFrame(_from_bgr8(bgr).astype(np.float64) / 255.0, np.clip(depth, 0.0, 1.0)))

    height, width = frames[0].size
    mask = _read_mask(mask_path)
    if mask.shape != (height, width):
        mask = cv2.resize(mask, (width, height), interpolation=cv2.INTER_NEAREST)
    bad = mask >= num_classes
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise UnknownLabelError(f"{mask_path}: unknown label {mask[row, col]} at pixel ({row}, {col})")

    flow_images: Dict[int, np.ndarray] = {}
    flow_dir = os.path.join(path, "flow")
    if os.path.isdir(flow_dir):
        for name in os.listdir(flow_dir):
            match = FRAME_NAME.match(name)
            if match:
                flow_images[int(match.group(1))] = _from_bgr8(_read_png(os.path.join(flow_dir, name), cv2.IMREAD_COLOR))

    metadata = {
        "action": meta.get("action"),
        "object": meta.get("object"),
        "fps": int(meta.get("fps", 30)),
        "sequence_id": os.path.basename(os.path.normpath(path)),
    }
    return InteractionSequence(frames, mask.astype(np.int64), action, metadata, flow_images)


def list_sequences(root: str, split: str) -> List[str]:
    """Sequence directories of a split, sorted by id"""
    split_dir = os.path.join(root, split)
    if not os.path.isdir(split_dir):
        raise DataError(f"split directory {split_dir} not found")
    return sorted(
        os.path.join(split_dir, name) for name in os.listdir(split_dir)
        if os.path.isdir(os.path.join(split_dir, name))
    )


def kept_frame_indices(num_frames: int, source_fps: int, target_fps: int) -> List[int]:
    """Every floor(source/target)-th frame, always ending with the last one"""
    if target_fps < 1 or target_fps > source_fps:
        raise ValueError(f"target fps {target_fps} must be in [1, {source_fps}]")
    stride = source_fps // target_fps
    kept = list(range(0, num_frames, stride))
    if kept[-1] != num_frames - 1:
        kept.append(num_frames - 1)
    return kept


def _resize_frame(frame: RgbdFrame, target: Tuple[int, int]) -> RgbdFrame:
    if frame.size == tuple(target):
        return frame
    height, width = target
    rgb = cv2.resize(np.ascontiguousarray(frame.rgb.transpose(1, 2, 0)), (width, height),
                     interpolation=cv2.INTER_LINEAR)
    depth = cv2.resize(frame.depth[0], (width, height), interpolation=cv2.INTER_LINEAR)
    return RgbdFrame(rgb.transpose(2, 0, 1), depth)


def _resize_flow_image(image: np.ndarray, target: Tuple[int, int]) -> np.ndarray:
    if image.shape[1:] == tuple(target):
        return image
    height, width = target
    resized = cv2.resize(np.ascontiguousarray(image.transpose(1, 2, 0)), (width, height),
                         interpolation=cv2.INTER_LINEAR)
    return resized.transpose(2, 0, 1)


def preprocess(sequence: InteractionSequence, target: Tuple[int, int] = (48, 48),
               source_fps: Optional[int] = None, target_fps: int = 10, use_depth: bool = True,
               flow_dim: str = "3d", flow_config: Optional[FlowConfig] = None) -> SequenceBatch:
    """Subsample, resize and stack a sequence into model inputs"""
    if not is_divisible_extent(target):
        raise ShapeError(f"target size {tuple(target)} must be two positive extents divisible by 8")
    target = tuple(int(v) for v in target)
    source_fps = source_fps or sequence.fps
    kept = kept_frame_indices(len(sequence), source_fps, target_fps)
    estimator = SceneFlowEstimator(flow_config, flow_dim="3d")

    frames = [_resize_frame(sequence.frames[i], target) for i in kept]
    mask = cv2.resize(sequence.affordance_mask.astype(np.uint8), (target[1], target[0]),
                      interpolation=cv2.INTER_NEAREST).astype(np.int64)

    appearance = []
    flows = []
    for position, (index, frame) in enumerate(zip(kept, frames)):
        appearance.append(frame.stacked() if use_depth else frame.rgb.copy())
        if position == 0:
            image = zero_motion_image(*target)
        elif index in sequence.flow_images:
            image = _resize_flow_image(sequence.flow_images[index], target)
        else:
            image = estimator.flow_image(frames[position - 1], frame)
        if flow_dim == "2d":
            image = flatten_to_2d(image)
        flows.append(to_model_input(image))

    return SequenceBatch(appearance, flows, mask, sequence.action_label,
                         sequence.metadata.get("sequence_id"))


def attach_flow_images(sequence: InteractionSequence, target_fps: int,
                       flow_config: Optional[FlowConfig] = None) -> InteractionSequence:
    """Fill `sequence.flow_images` in memory for every kept frame after the first"""
    kept = kept_frame_indices(len(sequence), sequence.fps, target_fps)
    estimator = SceneFlowEstimator(flow_config)
    for previous, index in zip(kept, kept[1:]):
        if index not in sequence.flow_images:
            sequence.flow_images[index] = estimator.flow_image(sequence.frames[previous], sequence.frames[index])
    return sequence


def cache_flow_images(path: str, data_config: DataConfig, flow_config: FlowConfig,
                      force: bool = False) -> int:
    """Write colorized flow between consecutive kept frames; returns the number of images written"""
    sequence = load_sequence(path, data_config.depth_max_range)
    kept = kept_frame_indices(len(sequence), sequence.fps or data_config.source_fps, data_config.target_fps)
    estimator = SceneFlowEstimator(flow_config)
    flow_dir = os.path.join(path, "flow")
    os.makedirs(flow_dir, exist_ok=True)
    written = 0
    for previous, index in zip(kept, kept[1:]):
        target = os.path.join(flow_dir, f"{index:04d}.png")
        if os.path.exists(target) and not force:
            continue
        image = estimator.flow_image(sequence.frames[previous], sequence.frames[index])
        _write_png(target, _to_bgr8(image))
        written += 1
    return written


class AffordanceDataset:
    """Sequences of one split, preprocessed for a model configuration"""

    def __init__(self, data_config: DataConfig, model_config: ModelConfig, split: str = "train",
                 flow_config: Optional[FlowConfig] = None):
        self.data_config = data_config
        self.model_config = model_config
        self.flow_config = flow_config or FlowConfig()
        self.split = split
        self.paths = list_sequences(data_config.root, split)
        logger.info("Found %d sequences in %s/%s", len(self.paths), data_config.root, split)

    def __len__(self):
        return len(self.paths)

    def load(self, index: int) -> SequenceBatch:
        sequence = load_sequence(self.paths[index], self.data_config.depth_max_range,
                                 self.model_config.seg_channels)
        return preprocess(sequence, self.model_config.input_size, sequence.fps,
                          self.data_config.target_fps, self.model_config.use_depth,
                          self.model_config.flow_dim, self.flow_config)

    def batches(self, progress: bool = True) -> List[SequenceBatch]:
        return [self.load(i) for i in tqdm(range(len(self)), desc=f"Loading {self.split}",
                                           disable=not progress)]

    def __iter__(self) -> Iterator[SequenceBatch]:
        for index in range(len(self)):
            yield self.load(index)
