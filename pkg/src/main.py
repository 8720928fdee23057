#!/usr/bin/env python3
"""
Command-line controller: dataset synthesis, flow caching, training,
evaluation and single-input inference.
"""

import argparse
import logging
import math
import os
import sys
from typing import List, Optional

import cv2
import numpy as np
from tqdm import tqdm

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dataset import (
    AffordanceDataset,
    cache_flow_images,
    list_sequences,
    load_sequence,
    preprocess,
    save_sequence,
)
from src.errors import CheckpointError, ConfigError, ConfigMismatchError, DataError, TrainingDivergedError
from src.flow import to_model_input, zero_motion_image
from src.metrics import evaluate
from src.sequence import AffordanceTaxonomy, SequenceBatch
from src.sequence_generator import generate_synthetic_sequence, sample_specs
from src.trainer import load_model, train
from src.utils.config import RunConfig
from src.utils.helpers import make_run_dir, setup_logging
from src.visualizer import Visualizer, render_overlay

logger = logging.getLogger("src.main")

DEFAULT_CONFIG = os.path.join("config", "affordance_config.yaml")
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


def split_counts(count: int, split_ratio: float):
    """(train, val) sizes; the validation share is rounded down"""
    val = int(math.floor(count * (1.0 - split_ratio) + 1e-9))
    return count - val, val


def center_crop_square(image: np.ndarray) -> np.ndarray:
    """Largest centred square of an H x W (x C) image"""
    height, width = image.shape[:2]
    side = min(height, width)
    top = (height - side) // 2
    left = (width - side) // 2
    return image[top:top + side, left:left + side]


class AffordanceController:
    """Runs one subcommand against a validated configuration"""

    def __init__(self, config: RunConfig):
        self.config = config

    def cmd_synth(self, count: int, out_dir: str, seed: int, split_ratio: float,
                  progress: bool = True) -> List[str]:
        """Render `count` sequences into train/ and val/"""
        data = self.config.data
        n_train, n_val = split_counts(count, split_ratio)
        specs = sample_specs(count, seed, data.frames_per_sequence, data.frame_size, data.source_fps)
        written = []
        try:
            for index, spec in enumerate(tqdm(specs, desc="Synthesizing", disable=not progress)):
                split = "train" if index < n_train else "val"
                sequence = generate_synthetic_sequence(spec, seed * 100000 + index)
                directory = os.path.join(out_dir, split, f"seq_{index:05d}")
                save_sequence(sequence, directory, data.depth_max_range)
                written.append(directory)
        except OSError as e:
            raise DataError(f"cannot write dataset to {out_dir}: {e}")
        print(f"Wrote {n_train} train and {n_val} val sequences to {out_dir}")
        return written

    def cmd_flow(self, data_dir: str, force: bool = False, progress: bool = True) -> int:
        """Cache flow images for every sequence; returns the number of failed sequences"""
        failures = 0
        written = 0
        paths = []
        for split in ("train", "val"):
            if os.path.isdir(os.path.join(data_dir, split)):
                paths.extend(list_sequences(data_dir, split))
        if not paths:
            raise DataError(f"no sequences found under {data_dir}")
        for path in tqdm(paths, desc="Caching flow", disable=not progress):
            try:
                written += cache_flow_images(path, self.config.data, self.config.flow, force)
            except DataError as e:
                failures += 1
                logger.error("Skipping %s: %s", path, e)
        print(f"Flow images written: {written}   sequences failed: {failures}")
        return failures

    def cmd_train(self, resume: Optional[str] = None, run_name: Optional[str] = None):
        cfg = self.config
        dataset = AffordanceDataset(cfg.data, cfg.model, "train", cfg.flow)
        if len(dataset) == 0:
            raise DataError(f"no training sequences under {cfg.data.root}")
        batches = dataset.batches()
        run_dir = make_run_dir(cfg.run_root, run_name or cfg.variant)
        cfg.save_to_file(os.path.join(run_dir, "config.yaml"))
        result = train(cfg.model, cfg.training, batches, run_dir, resume, progress=True)

        print(f"\n{'=' * 60}")
        print(f"Training finished: {len(result.history)} epochs in {run_dir}")
        print(f"{'=' * 60}")
        print(result.history_frame().tail(10).to_string(index=False, float_format=lambda v: f"{v:.5f}"))
        return result

    def cmd_eval(self, checkpoint: str, data_dir: str, mode: str, split: str = "val",
                 out: Optional[str] = None):
        model = load_model(checkpoint)
        if model.config.seg_channels != AffordanceTaxonomy.num_classes():
            raise ConfigMismatchError(f"{checkpoint}: model predicts {model.config.seg_channels} classes, "
                                      f"dataset has {AffordanceTaxonomy.num_classes()}")
        self.config.data.root = data_dir
        dataset = AffordanceDataset(self.config.data, model.config, split, self.config.flow)
        if len(dataset) == 0:
            raise DataError(f"no sequences in {data_dir}/{split}")
        report = evaluate(model, dataset.batches(), mode, self.config.evaluation.eval_threshold, progress=True)

        print(f"\n{'=' * 60}")
        print(report.format_table())
        print(f"{'=' * 60}")
        out = out or os.path.join(os.path.dirname(os.path.abspath(checkpoint)), f"metrics_{mode}.json")
        with open(out, "w") as f:
            f.write(report.to_json())
        print(f"Report written to {out}")
        return report

    def _image_batch(self, model, image_path: str, depth_path: Optional[str]) -> SequenceBatch:
        bgr = cv2.imread(image_path, cv2.IMREAD_COLOR)
        if bgr is None:
            raise DataError(f"cannot read image {image_path}")
        height, width = model.config.input_size
        rgb = cv2.resize(np.ascontiguousarray(center_crop_square(bgr[:, :, ::-1])), (width, height),
                         interpolation=cv2.INTER_LINEAR)
        channels = [rgb.transpose(2, 0, 1).astype(np.float64) / 255.0]
        if model.config.use_depth:
            depth = np.zeros((height, width))
            if depth_path:
                raw = cv2.imread(depth_path, cv2.IMREAD_UNCHANGED)
                if raw is None:
                    raise DataError(f"cannot read depth {depth_path}")
                raw = raw[:, :, 0] if raw.ndim == 3 else raw
                depth = cv2.resize(np.ascontiguousarray(center_crop_square(raw)).astype(np.float64),
                                   (width, height), interpolation=cv2.INTER_LINEAR)
                depth = np.clip(depth / (self.config.data.depth_max_range * 1000.0), 0.0, 1.0)
            channels.append(depth[None])
        appearance = np.concatenate(channels, axis=0)
        return SequenceBatch([appearance], [to_model_input(zero_motion_image(height, width))],
                             np.zeros((height, width), dtype=np.int64), 0)

    def cmd_infer(self, checkpoint: str, input_path: str, threshold: float, out_dir: str,
                  depth_path: Optional[str] = None) -> List[str]:
        model = load_model(checkpoint)
        if os.path.isdir(input_path):
            sequence = load_sequence(input_path, self.config.data.depth_max_range, model.config.seg_channels)
            batch = preprocess(sequence, model.config.input_size, sequence.fps, self.config.data.target_fps,
                               model.config.use_depth, model.config.flow_dim, self.config.flow)
        elif os.path.isfile(input_path):
            batch = self._image_batch(model, input_path, depth_path)
        else:
            raise DataError(f"input {input_path} not found")

        prediction = model.predict(batch, "video", threshold)
        image = batch.appearance[-1][:3]
        os.makedirs(out_dir, exist_ok=True)
        overlay_path = os.path.join(out_dir, "overlay.png")
        labels_path = os.path.join(out_dir, "labels.png")
        cv2.imwrite(overlay_path, render_overlay(image, prediction.labels)[:, :, ::-1])
        cv2.imwrite(labels_path, prediction.labels.astype(np.uint8))
        outputs = [overlay_path, labels_path]
        if prediction.attention is not None:
            outputs.append(Visualizer(out_dir).plot_attention(prediction.attention, image))

        present = np.unique(prediction.labels[prediction.labels > 0])
        names = [AffordanceTaxonomy.class_name(int(label)) for label in present]
        action = AffordanceTaxonomy.ACTIONS[prediction.action]
        print(f"Action: {action}   affordances: {', '.join(names) or 'none above threshold'}")
        print(f"Outputs written to {out_dir}")
        return outputs


def build_parser() -> argparse.ArgumentParser:
    class _Parser(argparse.ArgumentParser):
        def error(self, message):
            self.print_usage(sys.stderr)
            self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")

    parser = _Parser(description='Spatio-temporal affordance segmentation')
    parser.add_argument('--config', type=str, default=None,
                        help=f'Path to configuration file (default: {DEFAULT_CONFIG} when present)')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.FIELD=VALUE',
                        help='Override a configuration field (repeatable)')
    parser.add_argument('--log-level', type=str, default=None, help='Logging level')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    synth = sub.add_parser('synth', help='Render a synthetic dataset')
    synth.add_argument('--count', type=int, default=None)
    synth.add_argument('--out', type=str, default=None)
    synth.add_argument('--seed', type=int, default=None)
    synth.add_argument('--split-ratio', type=float, default=None)

    flow = sub.add_parser('flow', help='Cache colorized flow images')
    flow.add_argument('--data', type=str, default=None)
    flow.add_argument('--force', action='store_true', help='Recompute existing flow images')

    train_cmd = sub.add_parser('train', help='Train a model')
    train_cmd.add_argument('--variant', type=str, default=None, help='Ablation variant name')
    train_cmd.add_argument('--resume', type=str, default=None, help='Checkpoint to continue from')
    train_cmd.add_argument('--run-name', type=str, default=None)

    eval_cmd = sub.add_parser('eval', help='Evaluate a checkpoint')
    eval_cmd.add_argument('--checkpoint', type=str, required=True)
    eval_cmd.add_argument('--data', type=str, default=None)
    eval_cmd.add_argument('--split', type=str, default='val')
    eval_cmd.add_argument('--mode', type=str, choices=['video', 'static'], default=None)
    eval_cmd.add_argument('--out', type=str, default=None, help='JSON report path')

    infer = sub.add_parser('infer', help='Segment one image or sequence directory')
    infer.add_argument('--checkpoint', type=str, required=True)
    infer.add_argument('--input', type=str, required=True)
    infer.add_argument('--depth', type=str, default=None, help='16-bit depth PNG for an image input')
    infer.add_argument('--threshold', type=float, default=None)
    infer.add_argument('--out', type=str, default='data/results/inference')
    return parser


def load_run_config(args) -> RunConfig:
    config_file = args.config
    if config_file is None and os.path.exists(DEFAULT_CONFIG):
        config_file = DEFAULT_CONFIG
    config = RunConfig.from_file(config_file) if config_file else RunConfig()
    if getattr(args, 'variant', None):
        config.apply_variant(args.variant)
    config.apply_overrides(args.overrides)
    config.check()
    return config


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_run_config(args)
    setup_logging(args.log_level or config.logging.level)
    controller = AffordanceController(config)

    if args.command == 'synth':
        controller.cmd_synth(
            args.count if args.count is not None else config.data.synth_count,
            args.out or config.data.root,
            args.seed if args.seed is not None else config.training.seed,
            args.split_ratio if args.split_ratio is not None else config.data.split_ratio,
        )
    elif args.command == 'flow':
        if controller.cmd_flow(args.data or config.data.root, args.force):
            return EXIT_DATA
    elif args.command == 'train':
        controller.cmd_train(args.resume, args.run_name)
    elif args.command == 'eval':
        controller.cmd_eval(args.checkpoint, args.data or config.data.root,
                            args.mode or config.evaluation.mode, args.split, args.out)
    elif args.command == 'infer':
        threshold = args.threshold if args.threshold is not None else config.evaluation.confidence_threshold
        controller.cmd_infer(args.checkpoint, args.input, threshold, args.out, args.depth)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; maps package errors to exit codes"""
    try:
        return run(argv)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError) as e:
        print(f"Data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as e:
        print(f"Training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
