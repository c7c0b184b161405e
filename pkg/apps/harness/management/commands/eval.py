"""
Evaluate a checkpoint.

Writes three files:

    <out>               episodes, eval_mse, recall, success, tokens, flops
    <out stem>_chunks.csv   episode, seed, step, one column per action value
    <out stem>_chunks.svt   'chunks' (E, K, 7 * arms) and 'seeds' (E, 2) u32

Emitted chunks carry the thresholded gripper value (0 or 1).

Without --data the held-out set of the checkpoint's config is used.
Without --out the files go next to the checkpoint as eval.csv etc.

Usage:
    svla eval --checkpoint runs/toy/checkpoint.svt --data data/train.svt --out runs/toy/eval_train.csv
"""

from pathlib import Path

import numpy as np

from apps.core.svt1 import write_records
from apps.core.utils import write_csv
from apps.decoding.decoder import threshold_gripper
from apps.efficiency.flops import flops_report
from apps.harness.evaluation import evaluate, held_out_episodes
from apps.harness.management.base import CheckpointCommand
from apps.monitoring.metrics import eval_mse, selection_recall
from apps.scenes.dataset import read_dataset, split_seed

EVAL_HEADER = ('episodes', 'eval_mse', 'recall', 'success', 'tokens', 'flops')
ACTION_COLUMNS = ('dx', 'dy', 'dz', 'rx', 'ry', 'rz', 'grip')


def chunk_header(arms: int) -> tuple:
    columns = ACTION_COLUMNS if arms == 1 else tuple(
        f'{name}_{arm}' for arm in range(arms) for name in ACTION_COLUMNS
    )
    return ('episode', 'seed', 'step') + columns


def chunk_rows(episodes, predictions: np.ndarray):
    for index, (episode, chunk) in enumerate(zip(episodes, predictions)):
        for step, values in enumerate(chunk):
            yield (index, episode.seed, step, *(float(v) for v in values))


class Command(CheckpointCommand):
    help = 'Evaluate a checkpoint: action MSE, selection recall and success proxy'
    out_help = 'Metrics CSV to write (default: eval.csv next to the checkpoint)'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', default=None, help='Dataset to evaluate on (default: held-out set)')

    def run(self, **options):
        model, cfg, step = self.load_model(options)
        episodes = read_dataset(options['data']) if options['data'] else held_out_episodes(cfg)
        report = evaluate(model, episodes, cfg.batch_size)

        out = Path(options['out']) if options['out'] else Path(options['checkpoint']).with_name('eval.csv')
        write_csv(out, EVAL_HEADER, [(
            report.episodes,
            report.mse,
            report.recall,
            report.success,
            cfg.token_budget().visual_out,
            flops_report(cfg.pipeline_shape()).total,
        )])
        chunks = threshold_gripper(report.predictions, cfg.arms)
        write_csv(out.with_name(out.stem + '_chunks.csv'), chunk_header(cfg.arms), chunk_rows(episodes, chunks))
        seeds = np.stack([split_seed(e.seed) for e in episodes]) if episodes else np.zeros((0, 2), dtype=np.uint32)
        write_records(out.with_name(out.stem + '_chunks.svt'), [
            ('chunks', chunks),
            ('seeds', seeds),
        ])

        eval_mse.set(report.mse)
        if report.recall is not None:
            selection_recall.set(report.recall)
        self.summary(f'evaluated step {step} on {report.episodes} episodes')
        self.summary(f'  eval_mse {report.mse:.6g}  success {report.success:.4f}')
        if report.recall is not None:
            self.summary(f'  recall {report.recall:.4f}')
        self.summary(f'  metrics {out}')
