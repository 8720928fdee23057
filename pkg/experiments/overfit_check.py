#!/usr/bin/env python3
"""
Overfit check: the full RGB-D + attention + 3D-flow model must memorize a
handful of synthetic sequences.
"""

import sys
import os
import argparse
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from experiments.common import GRAPHS_DIR, RESULTS_DIR, ensure_dirs, pixel_and_action_accuracy, synthesize, to_batches
from src.main import DEFAULT_CONFIG
from src.trainer import Trainer
from src.utils.config import RunConfig
from src.utils.helpers import setup_logging
from src.visualizer import Visualizer

PIXEL_ACCURACY_TARGET = 0.95
LOSS_RATIO_TARGET = 0.10


def run_overfit_check(sequences: int = 4, epochs: int = 300, learning_rate: float = 1e-3, seed: int = 0) -> bool:
    """Train on `sequences` synthetic sequences and check they are memorized"""
    config = RunConfig(DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None)
    config.apply_variant('rgbd-attn-3dflow')
    config.apply_overrides([f'training.epochs={epochs}', f'training.learning_rate={learning_rate}',
                            f'training.seed={seed}', 'training.batch_size=2'])
    config.check()
    setup_logging(config.logging.level)
    ensure_dirs()

    print("\n" + "=" * 80)
    print("EXPERIMENT: OVERFIT CHECK")
    print("=" * 80)
    print(f"Variant rgbd-attn-3dflow, input {config.model.input_size}, base width {config.model.base_width}")
    print(f"{sequences} sequences, {epochs} epochs, learning rate {learning_rate}")
    print("=" * 80)

    batches = to_batches(synthesize(config, sequences, seed), config)
    trainer = Trainer(config.model, config.training, progress=True)
    result = trainer.fit(batches)

    history = result.history_frame()
    initial = history['l_total'].iloc[0]
    final = history['l_total'].iloc[-1]
    pixel_accuracy, action_accuracy = pixel_and_action_accuracy(result.model, batches)

    Visualizer(GRAPHS_DIR).plot_loss_curves(history, "overfit_loss_curves.png")
    history.to_csv(os.path.join(RESULTS_DIR, "overfit_history.csv"), index=False)

    checks = [
        ("final L_total < 10% of initial", final < LOSS_RATIO_TARGET * initial, f"{final:.5f} / {initial:.5f}"),
        ("last-frame pixel accuracy >= 95%", pixel_accuracy >= PIXEL_ACCURACY_TARGET, f"{pixel_accuracy:.2%}"),
        ("action accuracy 100%", action_accuracy == 1.0, f"{action_accuracy:.2%}"),
    ]
    print(f"\n{'Check':<36} {'Value':>20}  Result")
    print("-" * 66)
    for name, passed, value in checks:
        print(f"{name:<36} {value:>20}  {'PASS' if passed else 'FAIL'}")
    print(f"\nTraining time: {result.elapsed:.1f} s")
    return all(passed for _, passed, _ in checks)


def main():
    parser = argparse.ArgumentParser(description='Overfit a few synthetic sequences')
    parser.add_argument('--sequences', type=int, default=4)
    parser.add_argument('--epochs', type=int, default=300)
    parser.add_argument('--lr', type=float, default=1e-3)
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()
    sys.exit(0 if run_overfit_check(args.sequences, args.epochs, args.lr, args.seed) else 1)


if __name__ == "__main__":
    main()
