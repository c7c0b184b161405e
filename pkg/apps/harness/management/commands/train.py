"""
Train a model on a generated dataset.

Writes <out>/checkpoint.svt and <out>/metrics.csv. The held-out set is
regenerated from the config seed.

Usage:
    svla train --config runs/toy.cfg --data data/train.svt --out runs/toy
"""

from apps.harness.evaluation import held_out_episodes
from apps.harness.management.base import SvlaCommand
from apps.harness.training import Trainer
from apps.scenes.dataset import read_dataset


class Command(SvlaCommand):
    help = 'Train the pipeline and write checkpoint plus metrics CSV'
    out_help = 'Run directory for checkpoint.svt and metrics.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Training dataset (from gen-data)')

    def run(self, **options):
        cfg = self.load_config(options)
        train = read_dataset(options['data'])
        result = Trainer(cfg, train, held_out_episodes(cfg)).fit(options['out'])
        last = result.rows[-1]
        self.summary(f'trained {cfg.steps} steps on {len(train)} episodes')
        self.summary(f'  train_mse {last.train_mse:.6g}  eval_mse {last.eval_mse:.6g}')
        if last.recall is not None:
            self.summary(f'  recall {last.recall:.4f}  success {last.success:.4f}')
        self.summary(f'  checkpoint {result.checkpoint}')
