"""
Configuration management for training, evaluation and inference runs
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from ..errors import ConfigError

logger = logging.getLogger(__name__)

RUN_ROOT_ENV = "AFFORDANCE_RUN_ROOT"
DEFAULT_RUN_ROOT = os.path.join("data", "runs")
SWITCH_RATIO = 0.75  # 150 of 200 epochs
LAMBDA_TOLERANCE = 1e-9

# Ablation rows: (use_depth, use_flow_stream, use_attention, flow_dim)
VARIANTS: Dict[str, Tuple[bool, bool, bool, str]] = {
    "rgb": (False, False, False, "3d"),
    "rgb-attn": (False, False, True, "3d"),
    "rgb-attn-2dflow": (False, True, True, "2d"),
    "rgbd": (True, False, False, "3d"),
    "rgbd-attn": (True, False, True, "3d"),
    "rgbd-attn-3dflow": (True, True, True, "3d"),
}


@dataclass
class ModelConfig:
    """Architecture hyperparameters and ablation switches"""
    input_size: Tuple[int, int] = (48, 48)
    base_width: int = 8
    num_affordance_classes: int = 9
    num_actions: int = 9
    use_depth: bool = True
    use_flow_stream: bool = True
    use_attention: bool = True
    flow_dim: str = "3d"  # or "2d"

    def __post_init__(self):
        self.input_size = tuple(int(v) for v in self.input_size)
        self.flow_dim = str(self.flow_dim).lower()

    @property
    def seg_channels(self) -> int:
        # background is class 0
        return self.num_affordance_classes + 1

    @property
    def latent_channels(self) -> int:
        return 8 * self.base_width

    @property
    def appearance_channels(self) -> int:
        return 4 if self.use_depth else 3

    @property
    def latent_size(self) -> Tuple[int, int]:
        return self.input_size[0] // 8, self.input_size[1] // 8

    @property
    def variant(self) -> Optional[str]:
        for name, (use_depth, use_flow, use_attention, flow_dim) in VARIANTS.items():
            if (use_depth, use_flow, use_attention) != (self.use_depth, self.use_flow_stream, self.use_attention):
                continue
            if not use_flow or flow_dim == self.flow_dim:
                return name
        return None

    def validate(self) -> List[str]:
        problems = []
        if len(self.input_size) != 2 or any(v <= 0 or v % 8 for v in self.input_size):
            problems.append(f"model.input_size {self.input_size} must be two positive extents divisible by 8")
        if self.base_width < 1:
            problems.append(f"model.base_width must be positive, got {self.base_width}")
        if self.num_affordance_classes < 1 or self.num_actions < 1:
            problems.append("model class and action counts must be positive")
        if self.flow_dim not in ("2d", "3d"):
            problems.append(f"model.flow_dim must be '2d' or '3d', got {self.flow_dim!r}")
        return problems


@dataclass
class TrainConfig:
    """Optimization schedule"""
    epochs: int = 200
    schedule_switch_epoch: Optional[int] = None  # defaults to 75% of epochs
    lambda_pairs: List[List[float]] = field(default_factory=lambda: [[0.2, 0.8], [0.5, 0.5]])
    learning_rate: float = 2e-5
    batch_size: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 10

    @property
    def switch_epoch(self) -> int:
        if self.schedule_switch_epoch is not None:
            return int(self.schedule_switch_epoch)
        return int(SWITCH_RATIO * self.epochs)

    def validate(self) -> List[str]:
        problems = []
        if self.epochs < 1:
            problems.append(f"training.epochs must be positive, got {self.epochs}")
        elif not 0 <= self.switch_epoch < self.epochs:
            problems.append(
                f"training.schedule_switch_epoch {self.switch_epoch} must lie in [0, epochs={self.epochs})")
        if len(self.lambda_pairs) != 2:
            problems.append("training.lambda_pairs must hold exactly two (lambda1, lambda2) pairs")
        for pair in self.lambda_pairs:
            if len(pair) != 2 or any(not 0.0 <= v <= 1.0 for v in pair):
                problems.append(f"training.lambda_pairs entry {pair} must be two weights in [0, 1]")
            elif abs(sum(pair) - 1.0) > LAMBDA_TOLERANCE:
                problems.append(f"training.lambda_pairs entry {pair} does not sum to 1")
        if self.learning_rate <= 0:
            problems.append(f"training.learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            problems.append(f"training.batch_size must be positive, got {self.batch_size}")
        return problems


@dataclass
class DataConfig:
    """Dataset location, synthesis and preprocessing"""
    root: str = os.path.join("data", "affordance_synth")
    target_fps: int = 10
    depth_max_range: float = 4.5
    frames_per_sequence: int = 12
    frame_size: Tuple[int, int] = (64, 64)
    source_fps: int = 30
    split_ratio: float = 962 / 1201
    synth_count: int = 100

    def __post_init__(self):
        self.frame_size = tuple(int(v) for v in self.frame_size)

    def validate(self) -> List[str]:
        problems = []
        if self.target_fps < 1 or self.source_fps < self.target_fps:
            problems.append(f"data.target_fps {self.target_fps} must be in [1, source_fps={self.source_fps}]")
        if not 0.0 < self.split_ratio <= 1.0:
            problems.append(f"data.split_ratio must be in (0, 1], got {self.split_ratio}")
        if self.frames_per_sequence < 1:
            problems.append("data.frames_per_sequence must be positive")
        if self.depth_max_range <= 0:
            problems.append("data.depth_max_range must be positive")
        return problems


@dataclass
class FlowConfig:
    """Scene-flow estimator settings"""
    pyramid_levels: int = 3
    patch_size: int = 7
    search_radius: int = 4
    space: str = "image"  # or "metric"
    fx: float = 58.0
    fy: float = 58.0
    cx: Optional[float] = None  # image centre when unset
    cy: Optional[float] = None

    def validate(self) -> List[str]:
        problems = []
        if self.pyramid_levels < 1 or self.patch_size < 1 or self.patch_size % 2 == 0:
            problems.append("flow.pyramid_levels must be positive and flow.patch_size odd")
        if self.search_radius < 1:
            problems.append("flow.search_radius must be positive")
        if self.fx <= 0 or self.fy <= 0:
            problems.append("flow.fx and flow.fy must be positive")
        if self.space not in ("image", "metric"):
            problems.append(f"flow.space must be 'image' or 'metric', got {self.space!r}")
        return problems


@dataclass
class EvaluationConfig:
    """Evaluation and inference settings"""
    mode: str = "video"  # or "static"
    confidence_threshold: float = 0.75
    eval_threshold: float = 0.0

    def validate(self) -> List[str]:
        problems = []
        if self.mode not in ("video", "static"):
            problems.append(f"evaluation.mode must be 'video' or 'static', got {self.mode!r}")
        for name in ("confidence_threshold", "eval_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"evaluation.{name} must be in [0, 1]")
        return problems


@dataclass
class LoggingConfig:
    level: str = "INFO"

    def validate(self) -> List[str]:
        if logging.getLevelName(str(self.level).upper()) not in (10, 20, 30, 40, 50):
            return [f"logging.level {self.level!r} is not a logging level"]
        return []


SECTIONS = {
    'model': ModelConfig,
    'training': TrainConfig,
    'data': DataConfig,
    'flow': FlowConfig,
    'evaluation': EvaluationConfig,
    'logging': LoggingConfig,
}


class RunConfig:
    """Merged model/train/data configuration for one run"""

    def __init__(self, config_file: Optional[str] = None):
        self.model = ModelConfig()
        self.training = TrainConfig()
        self.data = DataConfig()
        self.flow = FlowConfig()
        self.evaluation = EvaluationConfig()
        self.logging = LoggingConfig()
        self.variant: Optional[str] = None

        if config_file:
            self.load_from_file(config_file)

    @classmethod
    def from_file(cls, config_file: str) -> "RunConfig":
        return cls(config_file)

    def load_from_file(self, config_file: str):
        """Load configuration from a YAML (or JSON) file"""
        if not os.path.exists(config_file):
            raise ConfigError(f"config file {config_file} not found")
        try:
            with open(config_file, 'r') as f:
                config_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {config_file}: {e}")

        problems = []
        for section_name, section_data in config_data.items():
            if section_name == 'variant':
                self.apply_variant(section_data)
                continue
            if section_name not in SECTIONS or not isinstance(section_data, dict):
                problems.append(f"unknown config section: {section_name}")
                continue
            section = getattr(self, section_name)
            for key, value in section_data.items():
                if not hasattr(section, key):
                    problems.append(f"unknown config field: {section_name}.{key}")
                    continue
                setattr(section, key, value)
            if hasattr(section, '__post_init__'):
                section.__post_init__()
        if problems:
            raise ConfigError(problems)
        logger.info("Configuration loaded from %s", config_file)

    def apply_overrides(self, overrides: Iterable[str]):
        """Apply `section.field=value` overrides; values are parsed as YAML scalars"""
        problems = []
        for item in overrides:
            path, sep, raw = item.partition('=')
            section_name, dot, key = path.strip().partition('.')
            if not sep or not dot:
                problems.append(f"override {item!r} must look like section.field=value")
                continue
            section = getattr(self, section_name, None) if section_name in SECTIONS else None
            if section is None or not hasattr(section, key):
                problems.append(f"unknown config field: {path.strip()}")
                continue
            setattr(section, key, yaml.safe_load(raw))
            if hasattr(section, '__post_init__'):
                section.__post_init__()
        if problems:
            raise ConfigError(problems)

    def apply_variant(self, name: str):
        if name not in VARIANTS:
            raise ConfigError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
        use_depth, use_flow, use_attention, flow_dim = VARIANTS[name]
        self.model.use_depth = use_depth
        self.model.use_flow_stream = use_flow
        self.model.use_attention = use_attention
        self.model.flow_dim = flow_dim
        self.variant = name

    def validate(self) -> List[str]:
        problems = []
        for section_name in SECTIONS:
            problems.extend(getattr(self, section_name).validate())
        return problems

    def check(self):
        """Raise ConfigError listing every validation problem"""
        problems = self.validate()
        if problems:
            raise ConfigError(problems)

    @property
    def run_root(self) -> str:
        return os.environ.get(RUN_ROOT_ENV, DEFAULT_RUN_ROOT)

    def to_dict(self) -> Dict[str, Any]:
        data = {name: asdict(getattr(self, name)) for name in SECTIONS}
        for section in data.values():
            for key, value in section.items():
                if isinstance(value, tuple):
                    section[key] = list(value)
        if self.variant:
            data['variant'] = self.variant
        return data

    def save_to_file(self, config_file: str):
        """Save current configuration to YAML file"""
        directory = os.path.dirname(config_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(config_file, 'w') as f:
            yaml.safe_dump(self.to_dict(), f, default_flow_style=False, sort_keys=True)
        logger.info("Configuration saved to %s", config_file)

    def __str__(self):
        return (f"RunConfig:\n"
                f"  Model: {self.model}\n"
                f"  Training: {self.training}\n"
                f"  Data: {self.data}\n"
                f"  Flow: {self.flow}\n"
                f"  Evaluation: {self.evaluation}")


def model_config_from_dict(data: Dict[str, Any]) -> ModelConfig:
    known = {f.name for f in fields(ModelConfig)}
    return ModelConfig(**{k: v for k, v in data.items() if k in known})


def model_config_to_dict(config: ModelConfig) -> Dict[str, Any]:
    data = asdict(config)
    data['input_size'] = list(config.input_size)
    return data
