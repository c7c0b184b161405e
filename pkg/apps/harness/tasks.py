"""
Ablation sweep tasks.

Each (ratio, variant) row trains and evaluates one model independently, so
rows run as separate Celery tasks: eagerly in-process in development,
on the `ablation` queue in production. A row's model initialization and
batch order are seeded with seed ^ ratio; training data and the held-out
set come from the base seed so every row sees the same episodes.

Usage:
    from apps.harness.tasks import run_ablation

    rows = run_ablation(cfg, ratios=[4, 8, 16, 32], modules=False)
    write_ablation_csv('runs/ablation.csv', rows)
"""

import itertools
import logging

from celery import group

from apps.core.exceptions import BaseAppException, ConfigurationError
from apps.core.utils import write_csv
from apps.efficiency.flops import flops_report
from apps.harness.config import RunConfig, parse_run_config
from apps.harness.evaluation import evaluate, held_out_episodes
from apps.harness.training import Trainer
from apps.monitoring.metrics import ablation_rows_total
from apps.scenes.dataset import read_dataset
from apps.scenes.synth import generate_episodes
from config.celery_app import app

logger = logging.getLogger(__name__)

ABLATION_HEADER = (
    'ratio', 'dense_fusion', 'mode', 'status', 'visual_tokens', 'action_tokens',
    'flops', 'eval_mse', 'recall', 'success', 'error',
)
STATUS_OK = 'ok'
STATUS_ERROR = 'error'
MODULE_GRID = {
    'dense_fusion': (True, False),
    'mode': ('coupled', 'conventional'),
}


def row_config(cfg: RunConfig, ratio: int, overrides: dict) -> RunConfig:
    """
    Config for one ablation row.

    k is clamped to budget - 1 when the budget N / R cannot hold the
    configured cue tokens plus one anchor.

    Raises:
        ConfigurationError: R does not divide N, or the budget is below 2
    """
    n = cfg.num_patches
    if ratio < 1 or n % ratio != 0:
        raise ConfigurationError(f'ratio {ratio} does not divide N = {n}')
    budget = n // ratio
    if budget < 2:
        raise ConfigurationError(f'ratio {ratio} leaves a budget of {budget} token(s); need at least 2')
    return cfg.with_overrides({
        'sparsity_ratio': ratio,
        'cue_tokens': min(cfg.cue_tokens, budget - 1),
        'seed': cfg.seed ^ ratio,
        **overrides,
    })


def empty_row(ratio: int, cfg: RunConfig, overrides: dict) -> dict:
    return {
        'ratio': ratio,
        'dense_fusion': overrides.get('dense_fusion', cfg.dense_fusion),
        'mode': overrides.get('mode', cfg.mode),
        'status': STATUS_OK,
        'visual_tokens': None,
        'action_tokens': None,
        'flops': None,
        'eval_mse': None,
        'recall': None,
        'success': None,
        'error': '',
    }


@app.task(name='apps.harness.tasks.run_ablation_row')
def run_ablation_row(config_text: str, ratio: int, overrides: dict = None, data_path: str = None) -> dict:
    """Train and evaluate one ablation row; failures come back as a row with status 'error'."""
    overrides = overrides or {}
    cfg = parse_run_config(config_text)
    row = empty_row(ratio, cfg, overrides)
    try:
        row_cfg = row_config(cfg, ratio, overrides)
        budget = row_cfg.token_budget()
        row['visual_tokens'] = budget.visual_out
        row['action_tokens'] = budget.action_tokens
        row['flops'] = flops_report(row_cfg.pipeline_shape()).total
        if data_path:
            train = read_dataset(data_path)
        else:
            train = generate_episodes(cfg.seed, cfg.train_count, cfg.scene_spec())
        held_out = held_out_episodes(cfg)
        result = Trainer(row_cfg, train, held_out).fit()
        report = evaluate(result.model, held_out, row_cfg.batch_size)
        row.update(eval_mse=report.mse, recall=report.recall, success=report.success)
    except BaseAppException as exc:
        logger.warning('Ablation row failed', extra={'ratio': ratio, 'error': exc.message, 'code': exc.code})
        row.update(status=STATUS_ERROR, error=exc.message)
    return row


def module_variants(modules: bool) -> list[dict]:
    if not modules:
        return [{}]
    keys = list(MODULE_GRID)
    return [dict(zip(keys, values)) for values in itertools.product(*MODULE_GRID.values())]


def run_ablation(cfg: RunConfig, ratios, modules: bool = False, data_path: str = None) -> list[dict]:
    """
    Dispatch one task per (ratio, variant) and collect rows in dispatch order.

    A failing row never stops the sweep.
    """
    text = cfg.to_text()
    data_path = str(data_path) if data_path else None
    signatures = [
        run_ablation_row.s(text, int(ratio), variant, data_path)
        for ratio in ratios
        for variant in module_variants(modules)
    ]
    logger.info('Dispatching ablation rows', extra={'rows': len(signatures), 'ratios': list(ratios)})
    rows = group(signatures).apply_async().get()
    for row in rows:
        ablation_rows_total.labels(status=row['status']).inc()
    return rows


def write_ablation_csv(path, rows) -> int:
    return write_csv(path, ABLATION_HEADER, ([row[key] for key in ABLATION_HEADER] for row in rows))
