"""
Training loop and checkpoints.

Mini-batch Adam on the chunk MSE with a warm-up + cosine learning rate.
A metrics row and a checkpoint are written before the first update, every
`eval_interval` updates and after the last one. Checkpoints are SVT1
containers holding every parameter by name plus the run config as UTF-8
bytes ('meta/config'), so a checkpoint is enough to rebuild its model.

Usage:
    from apps.harness.training import Trainer, load_checkpoint

    result = Trainer(cfg, train_episodes, eval_episodes).fit('runs/toy')
    model, cfg, step = load_checkpoint('runs/toy/checkpoint.svt')
"""

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from apps.core.exceptions import CheckpointMismatchError, ConfigurationError, TrainingDivergedError
from apps.core.svt1 import read_records, write_records
from apps.core.utils import write_csv
from apps.decoding.decoder import chunk_loss
from apps.efficiency.flops import flops_report
from apps.harness.config import RunConfig, parse_run_config
from apps.harness.evaluation import evaluate
from apps.harness.pipeline import Batch, SemanticVLA
from apps.monitoring.metrics import (
    eval_mse,
    retained_visual_tokens,
    selection_recall,
    training_loss,
    training_steps_total,
)
from apps.numerics.optim import Adam, warmup_cosine_lr
from apps.numerics.rng import Rng

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.svt'
METRICS_NAME = 'metrics.csv'
METRICS_HEADER = ('step', 'train_mse', 'eval_mse', 'recall', 'success', 'tokens', 'flops')
CONFIG_RECORD = 'meta/config'
STEP_RECORD = 'meta/step'
BATCH_STREAM = 0xBA7C


@dataclass(frozen=True)
class MetricsRow:
    step: int
    train_mse: float
    eval_mse: float
    recall: float | None
    success: float
    tokens: int
    flops: int

    def cells(self) -> tuple:
        return (self.step, self.train_mse, self.eval_mse, self.recall, self.success, self.tokens, self.flops)


@dataclass
class TrainingResult:
    rows: list[MetricsRow]
    checkpoint: Path | None
    metrics: Path | None
    model: SemanticVLA


# Checkpoints

def checkpoint_records(model: SemanticVLA, step: int) -> dict[str, np.ndarray]:
    records = model.state_dict()
    records[CONFIG_RECORD] = np.frombuffer(model.cfg.to_text().encode('utf-8'), dtype=np.uint8)
    records[STEP_RECORD] = np.array([step], dtype=np.uint32)
    return records


def save_checkpoint(model: SemanticVLA, path, step: int) -> Path:
    """Write to a scratch file, then rename it over `path`."""
    path = Path(path)
    scratch = path.with_name(path.name + '.tmp')
    write_records(scratch, checkpoint_records(model, step))
    os.replace(scratch, path)
    logger.debug('Saved checkpoint', extra={'path': str(path), 'step': step})
    return path


def stored_config(records: dict[str, np.ndarray]) -> RunConfig:
    if CONFIG_RECORD not in records:
        raise CheckpointMismatchError(f'checkpoint has no {CONFIG_RECORD!r} record and no config was given')
    return parse_run_config(records[CONFIG_RECORD].tobytes().decode('utf-8'))


def checkpoint_config(path) -> RunConfig:
    """The run config stored in a checkpoint."""
    return stored_config(read_records(path))


def load_checkpoint(path, cfg: RunConfig = None) -> tuple[SemanticVLA, RunConfig, int]:
    """
    Rebuild a model from a checkpoint.

    Args:
        path: Checkpoint file
        cfg: Config to build the model from (default: the one stored in the file)

    Returns:
        (model, config, step)

    Raises:
        CheckpointMismatchError: parameter names or shapes differ from `cfg`'s model
    """
    records = read_records(path)
    cfg = cfg or stored_config(records)
    model = SemanticVLA(cfg)
    model.load_state_dict(records)
    step = int(records[STEP_RECORD][0]) if STEP_RECORD in records else 0
    logger.info('Loaded checkpoint', extra={'path': str(path), 'step': step})
    return model, cfg, step


# Training

def batch_order(cfg: RunConfig, count: int):
    """Endless episode indices: a fresh permutation per epoch, drawn from a child stream of the seed."""
    rng = Rng(cfg.seed).derive(BATCH_STREAM)
    while True:
        yield from rng.permutation(count).tolist()


class Trainer:
    """Fits one SemanticVLA to a fixed training set."""

    def __init__(self, cfg: RunConfig, train_episodes, eval_episodes, model: SemanticVLA = None):
        self.cfg = cfg
        self.train_episodes = list(train_episodes)
        self.eval_episodes = list(eval_episodes)
        self.model = model or SemanticVLA(cfg)
        self.optimizer = Adam(self.model.trainable_parameters(), lr=cfg.learning_rate)
        self.tokens = cfg.token_budget().visual_out
        self.flops = flops_report(cfg.pipeline_shape()).total

    def measure(self, step: int) -> MetricsRow:
        train = evaluate(self.model, self.train_episodes, self.cfg.batch_size)
        held_out = evaluate(self.model, self.eval_episodes, self.cfg.batch_size)
        row = MetricsRow(
            step=step,
            train_mse=train.mse,
            eval_mse=held_out.mse,
            recall=held_out.recall,
            success=held_out.success,
            tokens=self.tokens,
            flops=self.flops,
        )
        training_loss.set(train.mse)
        eval_mse.set(held_out.mse)
        if held_out.recall is not None:
            selection_recall.set(held_out.recall)
        logger.info(
            'Training checkpoint',
            extra={'step': step, 'train_mse': train.mse, 'eval_mse': held_out.mse, 'recall': held_out.recall},
        )
        return row

    def step(self, episodes, step: int) -> float:
        """One optimizer update; returns the batch loss."""
        batch = Batch.from_episodes(episodes, self.cfg.arms)
        self.model.zero_grads()
        loss = chunk_loss(self.model(batch).chunk, batch.target)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError(
                f'non-finite loss {value!r} at step {step}',
                details={'step': step, 'loss': value},
            )
        loss.backward()
        self.optimizer.step(warmup_cosine_lr(step, self.cfg.steps, self.cfg.learning_rate, self.cfg.warmup_frac))
        training_steps_total.inc()
        return value

    def fit(self, out_dir=None) -> TrainingResult:
        """
        Run `cfg.steps` updates.

        With `out_dir` set, the checkpoint and metrics CSV are written there;
        without it nothing touches the disk (ablation rows).

        Raises:
            TrainingDivergedError: the loss became NaN or infinite; the last
                checkpoint and the rows logged so far are kept on disk
        """
        cfg = self.cfg
        if cfg.steps and not self.train_episodes:
            raise ConfigurationError('training needs at least one episode')
        checkpoint = metrics = None
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            checkpoint = out_dir / CHECKPOINT_NAME
            metrics = out_dir / METRICS_NAME
        retained_visual_tokens.set(self.tokens)

        def record(step: int) -> None:
            rows.append(self.measure(step))
            if checkpoint is not None:
                save_checkpoint(self.model, checkpoint, step)

        rows: list[MetricsRow] = []
        record(0)
        order = batch_order(cfg, len(self.train_episodes))
        size = min(cfg.batch_size, len(self.train_episodes))
        try:
            for step in range(cfg.steps):
                indices = [next(order) for _ in range(size)]
                self.step([self.train_episodes[i] for i in indices], step)
                done = step + 1
                if done % cfg.eval_interval == 0 or done == cfg.steps:
                    record(done)
        finally:
            if metrics is not None:
                write_csv(metrics, METRICS_HEADER, (row.cells() for row in rows))

        logger.info(
            'Training finished',
            extra={'steps': cfg.steps, 'final_eval_mse': rows[-1].eval_mse, 'checkpoint': str(checkpoint)},
        )
        return TrainingResult(rows=rows, checkpoint=checkpoint, metrics=metrics, model=self.model)
