import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .autodiff import backward
from .checkpoint import TrainingState, load_checkpoint, save_checkpoint
from .errors import CheckpointError, DataError, NonFiniteError, ShapeError, TrainingDivergedError
from .model import AffordanceAutoencoder
from .optimization import AdamMoments, AdamOptimizer, lambda_schedule
from .sequence import SequenceBatch
from .utils.config import ModelConfig, TrainConfig, model_config_from_dict, model_config_to_dict
from .utils.helpers import format_duration
from .visualizer import Visualizer

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'lambda1', 'lambda2', 'l_total', 'l_seg', 'l_action']
CHECKPOINT_NAME = "checkpoint.ckpt"


@dataclass
class EpochRecord:
    """Mean losses of one epoch"""
    epoch: int
    lambda1: float
    lambda2: float
    l_total: float
    l_seg: float
    l_action: float


@dataclass
class TrainingResult:
    """Container for a finished (or paused) training run"""
    model: AffordanceAutoencoder
    state: TrainingState
    history: List[EpochRecord]
    run_dir: Optional[str] = None
    elapsed: float = 0.0
    artifacts: List[str] = field(default_factory=list)

    @property
    def lambda_history(self) -> List[Tuple[float, float]]:
        return [(r.lambda1, r.lambda2) for r in self.history]

    def history_frame(self) -> pd.DataFrame:
        return history_frame(self.history)


def history_frame(history: Sequence[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in history], columns=HISTORY_COLUMNS)


class Trainer:
    """Last-frame supervised training with gradient accumulation and Adam"""

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig, progress: bool = False):
        self.model_config = model_config
        self.train_config = train_config
        self.progress = progress
        self.model = AffordanceAutoencoder(model_config, seed=train_config.seed)
        self.optimizer = AdamOptimizer.from_config(dict(self.model.named_parameters()), train_config)
        self.rng = np.random.default_rng(train_config.seed)
        self.history: List[EpochRecord] = []
        self.epoch = 0  # completed epochs

    def state(self) -> TrainingState:
        moments = self.optimizer.moments
        return TrainingState(
            model_config=model_config_to_dict(self.model_config),
            train_config=asdict(self.train_config),
            epoch=self.epoch,
            step=moments.step,
            rng_state=self.rng.bit_generator.state,
            params={name: t.data.copy() for name, t in self.model.named_parameters()},
            adam_m={k: v.copy() for k, v in moments.first.items()},
            adam_v={k: v.copy() for k, v in moments.second.items()},
            history=[asdict(r) for r in self.history],
        )

    def restore(self, state: TrainingState):
        self.model.load_arrays(state.params)
        self.optimizer.moments = AdamMoments(dict(state.adam_m), dict(state.adam_v), state.step)
        self.rng.bit_generator.state = state.rng_state
        self.history = [EpochRecord(**r) for r in state.history]
        self.epoch = state.epoch
        logger.info("Resumed at epoch %d (Adam step %d)", self.epoch, state.step)

    def resume(self, path: str):
        self.restore(load_checkpoint(path, model_config_to_dict(self.model_config)))

    def save(self, path: str):
        save_checkpoint(self.state(), path)

    def train_epoch(self, epoch: int, batches: Sequence[SequenceBatch]) -> EpochRecord:
        lambda1, lambda2 = lambda_schedule(epoch, self.train_config)
        order = self.rng.permutation(len(batches))
        size = self.train_config.batch_size
        totals = np.zeros(3)

        for start in range(0, len(order), size):
            group = order[start:start + size]
            self.optimizer.zero_grad()
            for batch_id in group:
                batch = batches[int(batch_id)]
                try:
                    loss, l_seg, l_action = self.model.loss(batch, lambda1, lambda2)
                    # mean of per-sequence gradients over the group
                    backward(loss / len(group))
                except NonFiniteError as e:
                    raise TrainingDivergedError(epoch, int(batch_id), str(e))
                if not np.isfinite(loss.item()):
                    raise TrainingDivergedError(epoch, int(batch_id), "loss is not finite")
                totals += (loss.item(), l_seg.item(), l_action.item())
            self.optimizer.step()

        means = totals / len(batches)
        return EpochRecord(epoch, lambda1, lambda2, float(means[0]), float(means[1]), float(means[2]))

    def fit(self, batches: Sequence[SequenceBatch], run_dir: Optional[str] = None,
            until_epoch: Optional[int] = None) -> TrainingResult:
        """Train from the current epoch up to `until_epoch` (default: all epochs)"""
        if not batches:
            raise DataError("cannot train on an empty dataset")
        stop = self.train_config.epochs if until_epoch is None else min(until_epoch, self.train_config.epochs)
        checkpoint_path = os.path.join(run_dir, CHECKPOINT_NAME) if run_dir else None
        start_time = time.time()

        epochs = tqdm(range(self.epoch, stop), desc="Training", disable=not self.progress)
        for epoch in epochs:
            record = self.train_epoch(epoch, batches)
            self.history.append(record)
            self.epoch = epoch + 1
            logger.info("epoch %d  lambda=(%.2f, %.2f)  L_total %.5f  L_seg %.5f  L_action %.5f",
                        epoch, record.lambda1, record.lambda2, record.l_total, record.l_seg, record.l_action)
            if checkpoint_path and self.train_config.checkpoint_every > 0 \
                    and self.epoch % self.train_config.checkpoint_every == 0:
                self.save(checkpoint_path)

        elapsed = time.time() - start_time
        logger.info("Trained %d epochs in %s", len(self.history), format_duration(elapsed))
        result = TrainingResult(self.model, self.state(), list(self.history), run_dir, elapsed)
        if run_dir:
            result.artifacts = self.write_artifacts(run_dir, result)
        return result

    def write_artifacts(self, run_dir: str, result: TrainingResult) -> List[str]:
        os.makedirs(run_dir, exist_ok=True)
        checkpoint_path = os.path.join(run_dir, CHECKPOINT_NAME)
        save_checkpoint(result.state, checkpoint_path)
        history_path = os.path.join(run_dir, "history.csv")
        frame = result.history_frame()
        frame.to_csv(history_path, index=False)
        paths = [checkpoint_path, history_path]
        if len(frame):
            paths.append(Visualizer(run_dir).plot_loss_curves(frame))
        return paths


def load_model(path: str) -> AffordanceAutoencoder:
    """Rebuild a model from the configuration and parameters stored in a checkpoint"""
    state = load_checkpoint(path)
    model = AffordanceAutoencoder(model_config_from_dict(state.model_config))
    try:
        model.load_arrays(state.params)
    except ShapeError as e:
        raise CheckpointError(f"{path}: {e}")
    return model


def train(model_config: ModelConfig, train_config: TrainConfig, batches: Sequence[SequenceBatch],
          run_dir: Optional[str] = None, resume: Optional[str] = None,
          progress: bool = False) -> TrainingResult:
    """Build a model, optionally resume a checkpoint, and train it"""
    trainer = Trainer(model_config, train_config, progress=progress)
    if resume:
        trainer.resume(resume)
    return trainer.fit(batches, run_dir)
