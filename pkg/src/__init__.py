"""
Spatio-Temporal Affordance Segmentation Package
"""

__version__ = "1.0.0"
__author__ = "Affordance Segmentation Project"
__description__ = "RGB-D + 3D-flow autoencoder with soft attention for affordance segmentation in video"

# Export main classes for easy import
from .errors import AffordanceError
from .sequence import AffordanceTaxonomy, InteractionSequence, RgbdFrame, SequenceBatch
from .model import AffordanceAutoencoder, Prediction, total_loss
from .flow import CameraIntrinsics, FlowField, SceneFlowEstimator, colorize_flow, estimate_scene_flow
from .sequence_generator import SequenceSpec, generate_synthetic_sequence, sample_specs
from .dataset import AffordanceDataset, load_sequence, preprocess, save_sequence
from .metrics import ConfusionCounts, MetricsReport, evaluate
from .trainer import Trainer, TrainingResult, load_model, train
from .visualizer import Visualizer

__all__ = [
    'AffordanceError',
    'AffordanceTaxonomy',
    'InteractionSequence',
    'RgbdFrame',
    'SequenceBatch',
    'AffordanceAutoencoder',
    'Prediction',
    'total_loss',
    'CameraIntrinsics',
    'FlowField',
    'SceneFlowEstimator',
    'colorize_flow',
    'estimate_scene_flow',
    'SequenceSpec',
    'generate_synthetic_sequence',
    'sample_specs',
    'AffordanceDataset',
    'load_sequence',
    'preprocess',
    'save_sequence',
    'ConfusionCounts',
    'MetricsReport',
    'evaluate',
    'Trainer',
    'TrainingResult',
    'load_model',
    'train',
    'Visualizer',
]
