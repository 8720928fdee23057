"""
Shared setup for the experiment drivers: in-memory synthetic datasets and
result directories.
"""

import sys
import os
from typing import List, Tuple

import numpy as np
from tqdm import tqdm

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.dataset import attach_flow_images, preprocess
from src.model import AffordanceAutoencoder
from src.sequence import InteractionSequence, SequenceBatch
from src.sequence_generator import generate_synthetic_sequence, sample_specs
from src.utils.config import RunConfig

RESULTS_DIR = os.path.join("data", "results", "experiments")
GRAPHS_DIR = os.path.join("data", "results", "graphs")


def synthesize(config: RunConfig, count: int, seed: int) -> List[InteractionSequence]:
    """Render `count` sequences and attach their flow images once"""
    data = config.data
    specs = sample_specs(count, seed, data.frames_per_sequence, data.frame_size, data.source_fps)
    sequences = []
    for index, spec in enumerate(tqdm(specs, desc="Synthesizing")):
        sequence = generate_synthetic_sequence(spec, seed * 100000 + index)
        sequence.metadata['sequence_id'] = f"seq_{index:05d}"
        sequences.append(attach_flow_images(sequence, data.target_fps, config.flow))
    return sequences


def to_batches(sequences: List[InteractionSequence], config: RunConfig) -> List[SequenceBatch]:
    model = config.model
    return [preprocess(s, model.input_size, s.fps, config.data.target_fps, model.use_depth,
                       model.flow_dim, config.flow) for s in sequences]


def split(sequences: List, ratio: float) -> Tuple[List, List]:
    cut = len(sequences) - int(np.floor(len(sequences) * (1.0 - ratio) + 1e-9))
    return sequences[:cut], sequences[cut:]


def pixel_and_action_accuracy(model: AffordanceAutoencoder, batches: List[SequenceBatch],
                              mode: str = "video") -> Tuple[float, float]:
    """Last-frame pixel accuracy (background included) and action accuracy"""
    correct = total = actions = 0
    for batch in batches:
        prediction = model.predict(batch, mode, 0.0)
        correct += int(np.sum(prediction.labels == batch.mask))
        total += batch.mask.size
        actions += int(prediction.action == batch.action)
    return correct / total, actions / len(batches)


def ensure_dirs():
    for directory in (RESULTS_DIR, GRAPHS_DIR):
        os.makedirs(directory, exist_ok=True)
