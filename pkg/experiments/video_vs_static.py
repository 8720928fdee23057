#!/usr/bin/env python3
"""
Video versus static inference: one checkpoint evaluated on held-out
sequences with the full sequence and with the last frame alone.
"""

import sys
import os
import argparse
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from experiments.common import GRAPHS_DIR, RESULTS_DIR, ensure_dirs, split, synthesize, to_batches
from src.main import DEFAULT_CONFIG
from src.metrics import evaluate
from src.trainer import train
from src.utils.config import RunConfig
from src.utils.helpers import setup_logging
from src.visualizer import Visualizer

MEAN_IOU_TARGET = 0.5


def run_video_vs_static(count: int = 100, epochs: int = 60, learning_rate: float = 1e-3, seed: int = 0) -> bool:
    config = RunConfig(DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None)
    config.apply_overrides([f'training.epochs={epochs}', f'training.learning_rate={learning_rate}',
                            f'training.seed={seed}'])
    config.check()
    setup_logging(config.logging.level)
    ensure_dirs()

    print("\n" + "=" * 80)
    print("EXPERIMENT: VIDEO VS STATIC INFERENCE")
    print("=" * 80)

    train_set, val_set = split(synthesize(config, count, seed), 0.8)
    print(f"Train sequences: {len(train_set)}   held-out sequences: {len(val_set)}")
    result = train(config.model, config.training, to_batches(train_set, config), progress=True)

    val_batches = to_batches(val_set, config)
    reports = {mode: evaluate(result.model, val_batches, mode, config.evaluation.eval_threshold, progress=True)
               for mode in ("video", "static")}

    summary = pd.DataFrame({
        mode: {'mean_iou': r.mean_iou, 'mean_f1': r.mean_f1, 'weighted_f1': r.weighted_f1,
               'action_accuracy': r.action_accuracy}
        for mode, r in reports.items()
    }).T
    summary.index.name = 'mode'
    print("\n" + summary.to_string(float_format=lambda v: f"{v:.3f}"))
    summary.to_csv(os.path.join(RESULTS_DIR, "video_vs_static.csv"))
    Visualizer(GRAPHS_DIR).plot_variant_comparison(summary, filename="video_vs_static.png")
    for mode, report in reports.items():
        with open(os.path.join(RESULTS_DIR, f"video_vs_static_{mode}.json"), "w") as f:
            f.write(report.to_json())

    video_iou = reports['video'].mean_iou
    static_iou = reports['static'].mean_iou
    passed = video_iou >= MEAN_IOU_TARGET and video_iou > static_iou
    print(f"\nVideo mean IoU {video_iou:.3f} (target >= {MEAN_IOU_TARGET}), static {static_iou:.3f}: "
          f"{'PASS' if passed else 'FAIL'}")
    return passed


def main():
    parser = argparse.ArgumentParser(description='Compare video and static inference')
    parser.add_argument('--count', type=int, default=100)
    parser.add_argument('--epochs', type=int, default=60)
    parser.add_argument('--lr', type=float, default=1e-3)
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()
    sys.exit(0 if run_video_vs_static(args.count, args.epochs, args.lr, args.seed) else 1)


if __name__ == "__main__":
    main()
