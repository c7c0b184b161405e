"""
Global fixtures for the pytest test suite.

Fixtures:
  - micro_overrides: config keys for a pipeline small enough to train in a test
  - micro_config: a validated RunConfig built from micro_overrides
  - micro_spec: the SceneSpec of micro_config
  - micro_episodes: a handful of seeded episodes for micro_config
  - config_file: micro_config written to disk in the flat config format

Reference: https://docs.pytest.org/en/latest/reference/fixtures.html
"""

import factory.random
import pytest

from apps.harness.config import build_run_config
from apps.scenes.synth import generate_episodes

# N = 16 patches, |Z| = 4 (k = 2 cues, h = A = 2 anchors), K = 2
MICRO_OVERRIDES = {
    'seed': '11',
    'grid_side': '4',
    'num_objects': '2',
    'object_types': '3',
    'vocab_size': '16',
    'instr_len': '4',
    'chunk_len': '2',
    'sparsity_ratio': '4',
    'cue_tokens': '2',
    'sem_width': '8',
    'spa_width': '8',
    'text_width': '8',
    'tower_blocks': '2',
    'tower_heads': '2',
    'hook_depths': '0,1',
    'fusion_hidden': '8',
    'decoder_layers': '1',
    'decoder_width': '8',
    'decoder_heads': '2',
    'learning_rate': '0.01',
    'steps': '3',
    'batch_size': '4',
    'eval_interval': '2',
    'train_count': '8',
    'eval_count': '4',
    'bench_repetitions': '5',
}


@pytest.fixture(autouse=True, scope='session')
def seeded_faker():
    """Make factory-boy's Faker draws repeatable across runs."""
    factory.random.reseed_random(20251019)


@pytest.fixture
def micro_overrides() -> dict[str, str]:
    return dict(MICRO_OVERRIDES)


@pytest.fixture
def micro_config(micro_overrides):
    return build_run_config(micro_overrides)


@pytest.fixture
def micro_spec(micro_config):
    return micro_config.scene_spec()


@pytest.fixture
def micro_episodes(micro_config, micro_spec):
    return generate_episodes(micro_config.seed, micro_config.train_count, micro_spec)


@pytest.fixture
def config_file(tmp_path, micro_config):
    path = tmp_path / 'micro.cfg'
    path.write_text(micro_config.to_text(), encoding='utf-8')
    return path
