"""
Prometheus metrics setup.

Collectors for dataset generation, training, evaluation and the decoder.
Commands are short-lived, so instead of a scrape endpoint the registry is
written in the Prometheus text format when METRICS_EXPORT_PATH is set.

Usage:
    from apps.monitoring.metrics import training_steps_total, export_metrics

    training_steps_total.inc()
    export_metrics()

Reference: https://github.com/prometheus/client_python
"""

import logging

from django.conf import settings
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

from apps.core.utils import ensure_parent

logger = logging.getLogger(__name__)

# Create registry
REGISTRY = CollectorRegistry()

# Dataset metrics
episodes_generated_total = Counter(
    'episodes_generated_total',
    'Total synthetic episodes generated',
    ['target_type'],
    registry=REGISTRY,
)

# Training metrics
training_steps_total = Counter(
    'training_steps_total',
    'Total optimizer steps taken',
    registry=REGISTRY,
)

training_loss = Gauge(
    'training_loss',
    'Most recent training-set action MSE',
    registry=REGISTRY,
)

# Evaluation metrics
eval_mse = Gauge(
    'eval_mse',
    'Most recent held-out action MSE',
    registry=REGISTRY,
)

selection_recall = Gauge(
    'selection_recall',
    'Fraction of target patches retained among anchor tokens',
    registry=REGISTRY,
)

# Decoder metrics
decoder_invocations_total = Counter(
    'decoder_invocations_total',
    'Total parallel decoder forward passes',
    ['mode'],
    registry=REGISTRY,
)

chunk_latency_seconds = Histogram(
    'chunk_latency_seconds',
    'Wall-clock seconds to predict one action chunk',
    ['config'],
    buckets=(0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0),
    registry=REGISTRY,
)

retained_visual_tokens = Gauge(
    'retained_visual_tokens',
    'Visual tokens handed to the decoder per episode',
    registry=REGISTRY,
)

# Sweep metrics
ablation_rows_total = Counter(
    'ablation_rows_total',
    'Ablation rows processed',
    ['status'],
    registry=REGISTRY,
)


def export_metrics(path: str = None) -> str | None:
    """
    Write the registry in the Prometheus text format.

    Args:
        path: Destination file (default: settings.METRICS_EXPORT_PATH)

    Returns:
        The path written, or None when export is disabled
    """
    path = path or getattr(settings, 'METRICS_EXPORT_PATH', '')
    if not path:
        return None
    ensure_parent(path)
    write_to_textfile(str(path), REGISTRY)
    logger.debug('Exported metrics', extra={'path': str(path)})
    return str(path)
