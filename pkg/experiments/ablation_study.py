#!/usr/bin/env python3
"""
Ablation study: every input/attention variant trained briefly on the same
synthetic data and scored on the same held-out sequences.
"""

import sys
import os
import argparse
import copy
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from experiments.common import GRAPHS_DIR, RESULTS_DIR, ensure_dirs, split, synthesize, to_batches
from src.main import DEFAULT_CONFIG
from src.metrics import evaluate
from src.trainer import train
from src.utils.config import VARIANTS, RunConfig
from src.utils.helpers import setup_logging
from src.visualizer import Visualizer


def run_ablation_study(count: int = 20, epochs: int = 10, seed: int = 0) -> pd.DataFrame:
    base = RunConfig(DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None)
    base.apply_overrides([f'training.epochs={epochs}', f'training.seed={seed}'])
    setup_logging(base.logging.level)
    ensure_dirs()

    print("\n" + "=" * 80)
    print("EXPERIMENT: ABLATION STUDY")
    print("=" * 80)
    print(f"Variants: {', '.join(VARIANTS)}")
    print(f"{count} sequences, {epochs} epochs per variant")
    print("=" * 80)

    train_set, val_set = split(synthesize(base, count, seed), 0.8)
    rows = {}
    for name in VARIANTS:
        print(f"\nTraining {name}...")
        config = copy.deepcopy(base)
        config.apply_variant(name)
        config.check()
        result = train(config.model, config.training, to_batches(train_set, config), progress=True)
        report = evaluate(result.model, to_batches(val_set, config), config.evaluation.mode,
                          config.evaluation.eval_threshold)
        rows[name] = {
            'parameters': result.model.num_parameters(),
            'mean_iou': report.mean_iou,
            'mean_f1': report.mean_f1,
            'weighted_f1': report.weighted_f1,
            'action_accuracy': report.action_accuracy,
            'final_loss': result.history[-1].l_total,
        }
        with open(os.path.join(RESULTS_DIR, f"ablation_{name}.json"), "w") as f:
            f.write(report.to_json())

    summary = pd.DataFrame(rows).T
    summary.index.name = 'variant'
    print("\n" + "=" * 80)
    print("ABLATION SUMMARY")
    print("=" * 80)
    print(summary.to_string(float_format=lambda v: f"{v:.3f}"))
    summary.to_csv(os.path.join(RESULTS_DIR, "ablation_summary.csv"))
    Visualizer(GRAPHS_DIR).plot_variant_comparison(summary, filename="ablation_variants.png")
    return summary


def main():
    parser = argparse.ArgumentParser(description='Train and score every model variant')
    parser.add_argument('--count', type=int, default=20)
    parser.add_argument('--epochs', type=int, default=10)
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()
    run_ablation_study(args.count, args.epochs, args.seed)


if __name__ == "__main__":
    main()
