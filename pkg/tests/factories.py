"""
Factories for generating test data.

This file uses `factory-boy` to build the pipeline's value objects: scene
specs, seeded episodes and run configs. Episodes are never assembled field
by field; they always come from the generator so every invariant holds.

Usage:
    from tests.factories import EpisodeFactory, SceneSpecFactory

    spec = SceneSpecFactory(grid_side=6)
    episode = EpisodeFactory(spec=spec)

Reference: https://factoryboy.readthedocs.io/
"""

import factory

from apps.harness.config import RunConfig
from apps.scenes.synth import episode_from_seed
from apps.scenes.types import Episode, SceneSpec


class SceneSpecFactory(factory.Factory):
    class Meta:
        model = SceneSpec

    grid_side = factory.Iterator([4, 6, 8])
    num_objects = 2
    object_types = factory.Faker('random_int', min=2, max=6)
    vocab_size = factory.LazyAttribute(lambda o: 8 + o.object_types + 8)
    instr_len = factory.Faker('random_int', min=3, max=8)
    chunk_len = factory.Faker('random_int', min=2, max=8)
    noise_std = 0.1


class EpisodeFactory(factory.Factory):
    """An Episode drawn from the generator for a Faker-chosen 64-bit seed."""

    class Meta:
        model = Episode

    seed = factory.Faker('random_int', min=0, max=(1 << 64) - 1)
    spec = factory.SubFactory(SceneSpecFactory)

    @classmethod
    def _create(cls, model_class, seed, spec):
        return episode_from_seed(seed, spec)

    _build = _create


class RunConfigFactory(factory.Factory):
    """Micro-sized configs; pass keyword overrides for the field under test."""

    class Meta:
        model = RunConfig

    seed = factory.Faker('random_int', min=0, max=1 << 32)
    grid_side = 4
    num_objects = 2
    object_types = 3
    vocab_size = 16
    instr_len = 4
    chunk_len = 2
    sparsity_ratio = 4
    cue_tokens = 2
    sem_width = 8
    spa_width = 8
    text_width = 8
    tower_blocks = 2
    tower_heads = 2
    hook_depths = (0, 1)
    fusion_hidden = 8
    decoder_layers = 1
    decoder_width = 8
    decoder_heads = 2
    mode = factory.Iterator(['coupled', 'lite', 'conventional'])
    steps = 2
    batch_size = 4
    eval_interval = 1
    train_count = 6
    eval_count = 3
    bench_repetitions = 5
