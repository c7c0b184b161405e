"""
Sparsification-ratio ablation.

One row per ratio (times the dense_fusion x mode grid with --modules).
A ratio that does not divide N yields an error row; the sweep continues.

Usage:
    svla ablate --config runs/toy.cfg --ratios 4,8,16,32 --out runs/ablation.csv
    svla ablate --config runs/toy.cfg --ratios 8 --modules --out runs/modules.csv
"""

from apps.core.exceptions import ConfigurationError
from apps.harness.management.base import SvlaCommand
from apps.harness.tasks import run_ablation, write_ablation_csv

DEFAULT_RATIOS = '4,8,16,32'


def parse_ratios(text: str) -> list[int]:
    try:
        ratios = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigurationError(f'--ratios expects comma-separated integers, got {text!r}')
    if not ratios:
        raise ConfigurationError('--ratios is empty')
    return ratios


class Command(SvlaCommand):
    help = 'Train and evaluate one model per sparsification ratio'
    out_help = 'Ablation table CSV to write'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--ratios', default=DEFAULT_RATIOS, help='Comma-separated sparsification ratios')
        parser.add_argument('--modules', action='store_true', help='Also sweep dense_fusion x decoder mode')
        parser.add_argument('--data', default=None, help='Training dataset (default: generated from the seed)')

    def run(self, **options):
        cfg = self.load_config(options)
        rows = run_ablation(cfg, parse_ratios(options['ratios']), options['modules'], options['data'])
        write_ablation_csv(options['out'], rows)
        for row in rows:
            if row['status'] == 'ok':
                self.summary(
                    f'R={row["ratio"]:<3} fusion={row["dense_fusion"]!s:<5} {row["mode"]:<12} '
                    f'tokens {row["visual_tokens"]:>3}  eval_mse {row["eval_mse"]:.6g}'
                )
            else:
                self.summary(f'R={row["ratio"]:<3} error: {row["error"]}')
