"""
Baseline vs sparsified benchmark.

The baseline keeps every patch and decodes with 7 tokens per step
(pruning = false, mode = conventional); the sparsified config is the run
config as given. Both are timed on the same single episode and reported
one CSV row per (config, stage) next to the analytic FLOPs of that stage.

Usage:
    from apps.harness.benchmarking import run_bench

    report = run_bench(cfg)
    report.write_csv('runs/bench.csv')
"""

import logging
from dataclasses import dataclass, field

from django.conf import settings

from apps.core.utils import write_csv
from apps.efficiency.bench import bench
from apps.efficiency.flops import FlopsReport, flops_ratio, flops_report
from apps.harness.config import RunConfig
from apps.harness.pipeline import Batch, SemanticVLA
from apps.monitoring.metrics import chunk_latency_seconds, decoder_invocations_total
from apps.scenes.synth import generate_episodes

logger = logging.getLogger(__name__)

BENCH_HEADER = ('config', 'stage', 'seq_len', 'flops', 'median_s', 'p95_s', 'actions_per_s')
BASELINE = 'baseline'
SPARSIFIED = 'sparsified'


def bench_configs(cfg: RunConfig) -> dict[str, RunConfig]:
    return {
        BASELINE: cfg.with_overrides({'pruning': False, 'mode': 'conventional'}),
        SPARSIFIED: cfg,
    }


@dataclass
class BenchRow:
    config: str
    stage: str
    seq_len: int
    flops: int
    median_s: float
    p95_s: float
    actions_per_s: float

    def cells(self) -> tuple:
        return (self.config, self.stage, self.seq_len, self.flops, self.median_s, self.p95_s, self.actions_per_s)


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    flops: dict[str, FlopsReport] = field(default_factory=dict)

    def row(self, config: str, stage: str) -> BenchRow:
        for row in self.rows:
            if row.config == config and row.stage == stage:
                return row
        raise KeyError((config, stage))

    @property
    def analytic_ratio(self) -> float:
        """Baseline / sparsified decoder-stage FLOPs."""
        return self.flops[BASELINE].stage('decoder').flops / self.flops[SPARSIFIED].stage('decoder').flops

    @property
    def total_ratio(self) -> float:
        return flops_ratio(self.flops[BASELINE], self.flops[SPARSIFIED])

    @property
    def measured_ratio(self) -> float:
        """Baseline / sparsified median decode-stage wall clock."""
        return self.row(BASELINE, 'decode').median_s / self.row(SPARSIFIED, 'decode').median_s

    def write_csv(self, path) -> int:
        return write_csv(path, BENCH_HEADER, (row.cells() for row in self.rows))


def stage_accounting(cfg: RunConfig, report: FlopsReport) -> dict[str, tuple[int, int]]:
    """(seq_len, flops) per timed stage."""
    sequence = cfg.token_budget().sequence
    return {
        'encode': (cfg.num_patches, report.encode_flops),
        'decode': (sequence, report.stage('decoder').flops),
        'total': (sequence, report.total),
    }


def run_bench(cfg: RunConfig, repetitions: int = None, warmup: int = None) -> BenchReport:
    repetitions = repetitions or cfg.bench_repetitions
    warmup = settings.BENCH_WARMUP if warmup is None else warmup
    episode = generate_episodes(cfg.seed, 1, cfg.scene_spec())[0]
    result = BenchReport()

    for name, variant in bench_configs(cfg).items():
        model = SemanticVLA(variant)
        batch = Batch.from_episodes([episode], variant.arms)
        report = flops_report(variant.pipeline_shape(), config=name)
        result.flops[name] = report
        timings = bench(
            encode=lambda: model.encode(batch),
            decode=model.decode,
            repetitions=repetitions,
            warmup=warmup,
        )
        actions = variant.chunk_len * variant.arms
        for stage, (seq_len, flops) in stage_accounting(variant, report).items():
            timing = timings[stage]
            result.rows.append(BenchRow(
                config=name,
                stage=stage,
                seq_len=seq_len,
                flops=flops,
                median_s=timing.median_s,
                p95_s=timing.p95_s,
                actions_per_s=timing.actions_per_second(actions),
            ))
        chunk_latency_seconds.labels(config=name).observe(timings['total'].median_s)
        decoder_invocations_total.labels(mode=variant.mode).inc(model.invocations)

    logger.info(
        'Benchmark ratios',
        extra={'analytic_decoder_ratio': result.analytic_ratio, 'measured_decode_ratio': result.measured_ratio},
    )
    return result
