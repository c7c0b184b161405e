"""
Wall-clock benchmarking.

Times the encode stage (towers, pruners, fusion), the decode stage
(sequence assembly, decoder, heads) and both together on fixed inputs.
Warm-up runs are discarded. Thread pinning for the measured region is
arranged by the caller through the BLAS thread environment variables
before numpy is imported (see apps.harness.cli).

Usage:
    from apps.efficiency.bench import bench

    timings = bench(encode=lambda: pipeline.encode(batch),
                    decode=lambda state: pipeline.decode(state),
                    repetitions=20, warmup=3)
    timings['total'].median_s
"""

import logging
import statistics
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.core.utils import format_duration

logger = logging.getLogger(__name__)

MIN_REPETITIONS = 5
DEFAULT_WARMUP = 3
STAGES = ('encode', 'decode', 'total')


@dataclass(frozen=True)
class StageTiming:
    stage: str
    median_s: float
    p95_s: float
    min_s: float
    samples: int

    def actions_per_second(self, actions_per_chunk: int) -> float:
        """Throughput: actions per chunk / median seconds per chunk."""
        return actions_per_chunk / self.median_s if self.median_s > 0 else float('inf')


def time_call(fn: Callable[[], Any], repetitions: int, warmup: int) -> list[float]:
    """Seconds per call over `repetitions` measured runs after `warmup` discarded runs."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return samples


def summarize(stage: str, samples: list[float]) -> StageTiming:
    return StageTiming(
        stage=stage,
        median_s=statistics.median(samples),
        p95_s=float(np.percentile(samples, 95)),
        min_s=min(samples),
        samples=len(samples),
    )


def bench(
    encode: Callable[[], Any],
    decode: Callable[[Any], Any],
    repetitions: int = 20,
    warmup: int = DEFAULT_WARMUP,
) -> dict[str, StageTiming]:
    """
    Time encode, decode and encode + decode.

    Args:
        encode: Produces the decoder's inputs from fixed episodes
        decode: Consumes encode's output and predicts a chunk
        repetitions: Measured runs per stage (>= 5)
        warmup: Discarded runs per stage

    Returns:
        Mapping of stage name to its timing summary

    Raises:
        ConfigurationError: fewer than 5 repetitions
    """
    if repetitions < MIN_REPETITIONS:
        raise ConfigurationError(f'bench needs at least {MIN_REPETITIONS} repetitions, got {repetitions}')
    state = encode()
    timings = {
        'encode': summarize('encode', time_call(encode, repetitions, warmup)),
        'decode': summarize('decode', time_call(lambda: decode(state), repetitions, warmup)),
        'total': summarize('total', time_call(lambda: decode(encode()), repetitions, warmup)),
    }
    logger.info(
        'Benchmark complete',
        extra={stage: format_duration(timing.median_s) for stage, timing in timings.items()},
    )
    return timings
