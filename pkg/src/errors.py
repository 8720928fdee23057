"""
Exception hierarchy for the affordance segmentation package
"""

from typing import Optional


class AffordanceError(Exception):
    """Base class for every error raised by this package"""


# Tensor substrate

class ShapeError(AffordanceError, ValueError):
    """Tensor extents are inconsistent with an operation"""


class GraphError(AffordanceError, RuntimeError):
    """Misuse of the recorded differentiation graph"""


class LabelRangeError(AffordanceError, ValueError):
    """Integer target label outside [0, num_classes)"""


class NonFiniteError(AffordanceError, ArithmeticError):
    """An operation produced NaN or Inf values"""

    def __init__(self, op_name: str):
        super().__init__(f"{op_name} produced non-finite values")
        self.op_name = op_name


# Configuration

class ConfigError(AffordanceError, ValueError):
    """Run configuration failed validation"""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


# Data

class DataError(AffordanceError, IOError):
    """Dataset content or layout problem"""


class MissingAnnotationError(DataError):
    """Sequence directory has no last-frame mask"""


class UnknownLabelError(DataError):
    """Mask or metadata refers to a label outside the taxonomy"""


class FrameOrderError(DataError):
    """Frame indices are not contiguous and increasing"""


class UnknownAffordanceError(DataError, KeyError):
    """Affordance name is not part of the taxonomy"""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


# Checkpoints

class CheckpointError(AffordanceError, IOError):
    """Checkpoint file cannot be used"""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version"""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint file ends before its declared content"""


class ConfigMismatchError(CheckpointError):
    """Checkpoint model configuration differs from the requested one"""


# Training

class TrainingDivergedError(AffordanceError, ArithmeticError):
    """Loss became non-finite during training"""

    def __init__(self, epoch: int, batch_id: int, detail: Optional[str] = None):
        message = f"non-finite loss at epoch {epoch}, batch {batch_id}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.epoch = epoch
        self.batch_id = batch_id
