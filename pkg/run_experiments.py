#!/usr/bin/env python3
"""
Runs the overfit, video-vs-static and ablation experiments in sequence
"""

import sys
import os
import argparse
import importlib.util
import subprocess
import time

EXPERIMENTS = {
    'overfit': ('overfit_check.py', 'Overfit Check'),
    'video': ('video_vs_static.py', 'Video vs Static Inference'),
    'ablation': ('ablation_study.py', 'Ablation Study'),
}

# import name -> requirements.txt name
REQUIRED_PACKAGES = {
    'numpy': 'numpy',
    'scipy': 'scipy',
    'pandas': 'pandas',
    'matplotlib': 'matplotlib',
    'seaborn': 'seaborn',
    'yaml': 'pyyaml',
    'tqdm': 'tqdm',
    'sklearn': 'scikit-learn',
    'cv2': 'opencv-python-headless',
    'PIL': 'Pillow',
}

OUTPUT_DIRS = ('data/runs', 'data/results/graphs', 'data/results/experiments')


def check_environment() -> bool:
    """Create output directories and report missing packages"""
    for directory in OUTPUT_DIRS:
        os.makedirs(directory, exist_ok=True)
    missing = [dist for module, dist in REQUIRED_PACKAGES.items() if importlib.util.find_spec(module) is None]
    if missing:
        print(f"Missing packages: {', '.join(missing)}")
        print("Install with: pip install -r requirements.txt")
        return False
    print(f"Environment ready; outputs go to {', '.join(OUTPUT_DIRS)}")
    return True


def run_experiment(key: str) -> bool:
    script, title = EXPERIMENTS[key]
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'experiments', script)
    print(f"\n{'=' * 80}\n{title.upper()}\n{'=' * 80}")
    if not os.path.exists(path):
        print(f"Missing experiment driver: {path}")
        return False
    return subprocess.call([sys.executable, path]) == 0


def run_suite(keys) -> bool:
    started = time.time()
    outcomes = {}
    for key in keys:
        began = time.time()
        outcomes[key] = (run_experiment(key), time.time() - began)

    print(f"\n{'=' * 80}\nSUMMARY\n{'=' * 80}")
    for key, (passed, seconds) in outcomes.items():
        print(f"  {EXPERIMENTS[key][1]:<30} {'OK' if passed else 'FAILED':<8} {seconds:8.1f} s")
    print(f"Wall time: {time.time() - started:.1f} s")
    return all(passed for passed, _ in outcomes.values())


def main():
    parser = argparse.ArgumentParser(description='Run affordance segmentation experiments')
    parser.add_argument('--setup', action='store_true', help='Only check the environment')
    parser.add_argument('--single', type=str, choices=list(EXPERIMENTS), help='Run one experiment')
    args = parser.parse_args()

    if not check_environment():
        sys.exit(1)
    if args.setup:
        return
    sys.exit(0 if run_suite([args.single] if args.single else list(EXPERIMENTS)) else 1)


if __name__ == "__main__":
    main()
