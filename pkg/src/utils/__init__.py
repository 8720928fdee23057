"""
Utility functions and helpers
"""

from .config import (
    VARIANTS,
    DataConfig,
    EvaluationConfig,
    FlowConfig,
    LoggingConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
)
from .helpers import (
    format_duration,
    is_divisible_extent,
    make_run_dir,
    normalize_values,
    round_half_up,
    setup_logging,
)

__all__ = [
    'VARIANTS',
    'DataConfig',
    'EvaluationConfig',
    'FlowConfig',
    'LoggingConfig',
    'ModelConfig',
    'RunConfig',
    'TrainConfig',
    'format_duration',
    'is_divisible_extent',
    'make_run_dir',
    'normalize_values',
    'round_half_up',
    'setup_logging',
]
