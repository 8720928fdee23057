import logging
import os
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from .sequence import palette_table
from .utils.helpers import round_half_up

logger = logging.getLogger(__name__)


def to_rgb8(image: np.ndarray) -> np.ndarray:
    """Channel-first image (C x H x W with C >= 3, floats in [0, 1] or uint8) -> H x W x 3 uint8"""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] < 3:
        raise ValueError(f"expected a channel-first colour image, got shape {image.shape}")
    image = image[:3].transpose(1, 2, 0)
    if image.dtype != np.uint8:
        image = np.clip(round_half_up(image * 255.0), 0, 255).astype(np.uint8)
    return image


def render_overlay(image: np.ndarray, labels: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Blend palette colours into labelled pixels; background pixels are left untouched"""
    base = to_rgb8(image)
    if base.shape[:2] != labels.shape:
        raise ValueError(f"label extents {labels.shape} differ from image {base.shape[:2]}")
    colours = palette_table()[labels]
    blended = round_half_up((1.0 - alpha) * base.astype(np.float64) + alpha * colours.astype(np.float64))
    out = base.copy()
    painted = labels > 0
    out[painted] = np.clip(blended[painted], 0, 255).astype(np.uint8)
    return out


class Visualizer:
    """Creates figures for training runs and predictions"""

    def __init__(self, output_dir: str = "data/results/graphs"):
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)
        sns.set_theme(style="darkgrid")

    def _save(self, fig, filename: str) -> str:
        path = os.path.join(self.output_dir, filename)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
        logger.debug("Saved figure %s", path)
        return path

    def plot_loss_curves(self, history: pd.DataFrame, filename: str = "loss_curves.png") -> str:
        """Per-epoch mean losses with the loss-weight switch marked"""
        fig, ax = plt.subplots(figsize=(8, 4.5))
        long = history.melt(id_vars=['epoch'], value_vars=['l_total', 'l_seg', 'l_action'],
                            var_name='loss', value_name='value')
        sns.lineplot(data=long, x='epoch', y='value', hue='loss', ax=ax)
        switches = history.index[history['lambda1'].diff().fillna(0) != 0]
        for index in switches:
            ax.axvline(history.loc[index, 'epoch'], color='gray', linestyle='--', alpha=0.6)
        ax.set_xlabel('Epoch')
        ax.set_ylabel('Mean loss')
        ax.set_title('Training loss')
        return self._save(fig, filename)

    def plot_attention(self, attention: np.ndarray, image: Optional[np.ndarray] = None,
                       filename: str = "attention.png") -> str:
        """Excitation mask as a heatmap, next to the input frame when given"""
        panels = 2 if image is not None else 1
        fig, axes = plt.subplots(1, panels, figsize=(4 * panels, 4))
        axes = np.atleast_1d(axes)
        if image is not None:
            axes[0].imshow(to_rgb8(image))
            axes[0].set_title('Input')
            axes[0].axis('off')
        sns.heatmap(np.asarray(attention).reshape(attention.shape[-2:]), ax=axes[-1],
                    cmap='magma', square=True, cbar=True, xticklabels=False, yticklabels=False)
        axes[-1].set_title('Attention mask')
        return self._save(fig, filename)

    def plot_variant_comparison(self, summary: pd.DataFrame,
                                metrics=('mean_iou', 'mean_f1', 'weighted_f1'),
                                filename: str = "variant_comparison.png") -> str:
        """Grouped bars of aggregate metrics, one group per model variant"""
        long = summary.reset_index().melt(id_vars=[summary.index.name or 'index'],
                                          value_vars=list(metrics), var_name='metric', value_name='value')
        fig, ax = plt.subplots(figsize=(10, 5))
        sns.barplot(data=long, x=summary.index.name or 'index', y='value', hue='metric', ax=ax)
        ax.set_ylim(0, 1)
        ax.set_xlabel('Variant')
        ax.set_ylabel('Score')
        ax.tick_params(axis='x', rotation=30)
        return self._save(fig, filename)
