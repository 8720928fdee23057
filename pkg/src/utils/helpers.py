"""
Helper functions shared across the package
"""

import logging
import os
import time
from typing import Optional, Sequence

import numpy as np


def is_divisible_extent(size: Sequence[int], factor: int = 8) -> bool:
    return len(size) == 2 and all(int(v) > 0 and int(v) % factor == 0 for v in size)


def setup_logging(level: str = "INFO"):
    """Configure the root logger once for CLI and experiment entry points"""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )


def format_duration(seconds: float) -> str:
    """Format seconds to human-readable string"""
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    elif seconds < 60:
        return f"{seconds:.1f} s"
    elif seconds < 3600:
        return f"{seconds / 60:.1f} min"
    else:
        return f"{seconds / 3600:.1f} hr"


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with .5 going up (platform independent)"""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def normalize_values(values: np.ndarray, degenerate: float = 0.5) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant array maps to `degenerate`"""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    min_val = values.min()
    max_val = values.max()
    if max_val == min_val:
        return np.full(values.shape, degenerate)
    return (values - min_val) / (max_val - min_val)


def make_run_dir(root: str, name: Optional[str] = None) -> str:
    """Create a fresh run directory under `root`"""
    name = name or time.strftime("run-%Y%m%d-%H%M%S")
    path = os.path.join(root, name)
    suffix = 1
    while os.path.exists(path):
        path = os.path.join(root, f"{name}-{suffix}")
        suffix += 1
    os.makedirs(path)
    return path
