"""
Generate a synthetic episode dataset.

Usage:
    svla gen-data --config runs/toy.cfg --count 1024 --out data/train.svt
"""

from apps.core.exceptions import ConfigurationError
from apps.harness.management.base import SvlaCommand
from apps.monitoring.metrics import episodes_generated_total
from apps.scenes.dataset import write_dataset
from apps.scenes.synth import generate_episodes, target_histogram


class Command(SvlaCommand):
    help = 'Generate seeded synthetic episodes into an SVT1 dataset file'
    out_help = 'Dataset file to write'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--count', type=int, default=None, help='Episodes to generate (default: train_count)')

    def run(self, **options):
        cfg = self.load_config(options)
        count = cfg.train_count if options['count'] is None else options['count']
        if count < 0:
            raise ConfigurationError(f'--count must be >= 0, got {count}')
        spec = cfg.scene_spec()
        episodes = generate_episodes(cfg.seed, count, spec)
        written = write_dataset(options['out'], episodes)

        histogram = target_histogram(episodes, spec)
        for code, total in histogram.items():
            episodes_generated_total.labels(target_type=str(code)).inc(total)
        self.summary(f'wrote {written} episodes to {options["out"]}')
        for code, total in histogram.items():
            self.summary(f'  type {code}: {total}')
