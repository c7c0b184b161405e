"""
Benchmark the baseline and sparsified pipelines.

Usage:
    svla bench --config runs/toy.cfg --out runs/bench.csv
"""

from apps.harness.benchmarking import run_bench
from apps.harness.management.base import SvlaCommand


class Command(SvlaCommand):
    help = 'Time encode/decode for baseline vs sparsified configs and report analytic FLOPs'
    out_help = 'Efficiency CSV to write'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--repetitions', type=int, default=None, help='Measured runs (default: bench_repetitions)')

    def run(self, **options):
        cfg = self.load_config(options)
        report = run_bench(cfg, repetitions=options['repetitions'])
        report.write_csv(options['out'])
        for row in report.rows:
            self.summary(
                f'{row.config:<10} {row.stage:<6} seq {row.seq_len:>4}  median {row.median_s * 1e3:8.3f} ms  '
                f'{row.actions_per_s:10.1f} actions/s'
            )
        self.summary(f'decoder FLOPs ratio {report.analytic_ratio:.2f}  measured decode ratio {report.measured_ratio:.2f}')
