"""
Evaluation metrics.

- action MSE over every chunk entry (raw predictions, no thresholding)
- selection recall: |anchors ∩ target patches| / min(h, |target patches|)
- success proxy: every continuous action within 0.1 of the target and the
  thresholded gripper column exact

Usage:
    from apps.harness.evaluation import evaluate

    report = evaluate(model, episodes, batch_size=32)
    report.mse, report.recall, report.success
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from apps.decoding.decoder import threshold_gripper
from apps.harness.config import RunConfig
from apps.harness.pipeline import Batch, SemanticVLA
from apps.numerics.rng import Rng
from apps.scenes.synth import generate_episodes
from apps.scenes.types import ACTION_DIM

logger = logging.getLogger(__name__)

SUCCESS_TOLERANCE = 0.1
HELD_OUT_STREAM = 0xE7A1


def held_out_episodes(cfg: RunConfig) -> list:
    """`eval_count` episodes from a stream of the seed disjoint from gen-data's."""
    master = Rng(cfg.seed).derive(HELD_OUT_STREAM).next_u64()
    return generate_episodes(master, cfg.eval_count, cfg.scene_spec())


@dataclass
class EvalReport:
    mse: float
    recall: float | None
    success: float
    episodes: int
    predictions: np.ndarray = field(repr=False)  # (E, K, 7 * arms), raw


def selection_recall(anchor_indices: np.ndarray, target_mask: np.ndarray) -> np.ndarray:
    """
    Per-episode recall of target patches among anchors.

    Args:
        anchor_indices: (B, h)
        target_mask: (B, N) booleans

    Returns:
        (B,) values in [0, 1]
    """
    hits = np.take_along_axis(target_mask, anchor_indices, axis=-1).sum(axis=-1)
    denominator = np.minimum(anchor_indices.shape[-1], target_mask.sum(axis=-1))
    return hits / np.maximum(denominator, 1)


def success_flags(predictions: np.ndarray, targets: np.ndarray, arms: int = 1) -> np.ndarray:
    """(B,) booleans: continuous dims within tolerance and gripper exact."""
    snapped = threshold_gripper(predictions, arms)
    gripper = np.zeros(predictions.shape[-1], dtype=bool)
    gripper[ACTION_DIM - 1::ACTION_DIM] = True
    error = np.abs(snapped - targets)
    continuous_ok = (error[..., ~gripper] < SUCCESS_TOLERANCE).all(axis=(-2, -1))
    gripper_ok = (snapped[..., gripper] == targets[..., gripper]).all(axis=(-2, -1))
    return continuous_ok & gripper_ok


def predict(model: SemanticVLA, episodes, batch_size: int):
    """Raw chunk predictions and anchor indices, batch by batch, in episode order."""
    predictions, anchors = [], []
    for start in range(0, len(episodes), batch_size):
        batch = Batch.from_episodes(episodes[start:start + batch_size], model.cfg.arms)
        output = model(batch)
        predictions.append(output.chunk.data)
        if output.encoded.anchors is not None:
            anchors.append(output.encoded.anchors.indices)
    return predictions, anchors


def evaluate(model: SemanticVLA, episodes, batch_size: int = 32) -> EvalReport:
    """
    Score `model` on `episodes`.

    Recall is None for the unpruned baseline, which keeps every patch.
    """
    if not episodes:
        empty = np.zeros((0, model.cfg.chunk_len, ACTION_DIM * model.cfg.arms))
        return EvalReport(mse=float('nan'), recall=None, success=float('nan'), episodes=0, predictions=empty)
    predictions, anchors = predict(model, episodes, batch_size)
    predictions = np.concatenate(predictions)
    batch = Batch.from_episodes(episodes, model.cfg.arms)
    squared = (predictions - batch.target) ** 2
    recall = None
    if anchors:
        recall = float(selection_recall(np.concatenate(anchors), batch.target_mask).mean())
    report = EvalReport(
        mse=float(squared.mean()),
        recall=recall,
        success=float(success_flags(predictions, batch.target, model.cfg.arms).mean()),
        episodes=len(episodes),
        predictions=predictions,
    )
    logger.debug('Evaluated', extra={'episodes': report.episodes, 'mse': report.mse, 'recall': report.recall})
    return report
