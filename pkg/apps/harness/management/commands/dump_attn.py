"""
Dump cue-token heatmaps, the anchor mask, aggregation attention and
per-word saliency for one seeded episode.

Usage:
    svla dump-attn --checkpoint runs/toy/checkpoint.svt --episode-seed 42 --out-dir runs/toy/attn
"""

from apps.harness.dumps import dump_attention
from apps.harness.management.base import CheckpointCommand
from apps.scenes.synth import episode_from_seed


class Command(CheckpointCommand):
    help = 'Write attention PGMs and saliency CSV for one episode'
    out_flags = ('--out-dir', '--out')
    out_help = 'Directory for the PGM, CSV and SVT1 files'
    out_required = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--episode-seed', type=int, required=True, help='Seed of the episode to render')

    def run(self, **options):
        model, cfg, _ = self.load_model(options)
        episode = episode_from_seed(options['episode_seed'], cfg.scene_spec())
        written = dump_attention(model, episode, options['out'])
        self.summary(f'wrote {len(written)} files to {options["out"]}')
