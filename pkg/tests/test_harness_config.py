"""
Tests for the flat run-config format and RunConfigSerializer.
"""

import pytest

from apps.core.exceptions import ConfigurationError
from apps.harness.config import (
    RunConfig,
    apply_overrides,
    build_run_config,
    load_run_config,
    parse_config_text,
    parse_run_config,
)
from apps.harness.serializers import RunConfigSerializer


@pytest.mark.unit
def test_parse_config_text_skips_comments_and_blanks():
    text = '# toy run\n\nseed = 7   # trailing\n  mode=lite\nhook_depths = 0, 1\n'
    assert parse_config_text(text) == {'seed': '7', 'mode': 'lite', 'hook_depths': '0, 1'}


@pytest.mark.unit
@pytest.mark.parametrize('text,message', [
    ('seed = 1\nseed = 2\n', 'duplicate key'),
    ('seed 1\n', 'expected "key = value"'),
    ('= 4\n', 'missing key'),
])
def test_parse_config_text_errors(text, message):
    with pytest.raises(ConfigurationError, match=message):
        parse_config_text(text)


@pytest.mark.unit
def test_empty_config_is_all_defaults():
    assert parse_run_config('') == RunConfig()
    assert load_run_config(None) == RunConfig()


@pytest.mark.unit
def test_unknown_key_is_rejected():
    with pytest.raises(ConfigurationError, match='sparsity') as exc:
        build_run_config({'sparsity': '8'})
    assert 'sparsity' in exc.value.details


@pytest.mark.unit
def test_to_text_round_trips(micro_config):
    text = micro_config.to_text()
    assert text.splitlines()[0] == 'seed = 11'
    assert 'hook_depths = 0,1' in text.splitlines()
    assert 'dense_fusion = true' in text.splitlines()
    assert parse_run_config(text) == micro_config


@pytest.mark.unit
def test_overrides_and_seed(tmp_path, micro_config):
    merged = apply_overrides({'seed': '1', 'mode': 'lite'}, ['mode = coupled', 'steps=5'], seed=9)
    assert merged == {'seed': '9', 'mode': 'coupled', 'steps': '5'}
    with pytest.raises(ConfigurationError, match='--set'):
        apply_overrides({}, ['steps'])

    path = tmp_path / 'run.cfg'
    path.write_text(micro_config.to_text(), encoding='utf-8')
    cfg = load_run_config(path, overrides=['sparsity_ratio=8', 'cue_tokens=1'], seed=3)
    assert (cfg.seed, cfg.sparsity_ratio, cfg.cue_tokens, cfg.grid_side) == (3, 8, 1, 4)


@pytest.mark.unit
def test_missing_file_is_an_os_error(tmp_path):
    with pytest.raises(OSError):
        load_run_config(tmp_path / 'absent.cfg')


@pytest.mark.unit
def test_derived_budget(micro_config):
    assert micro_config.num_patches == 16
    assert micro_config.visual_budget == 4
    assert micro_config.anchor_tokens == micro_config.agg_tokens == 2
    budget = micro_config.token_budget()
    assert (budget.visual_out, budget.action_tokens, budget.sequence) == (4, 6, 4 + 1 + 4 + 6)


@pytest.mark.unit
def test_reference_defaults():
    cfg = RunConfig()
    assert (cfg.num_patches, cfg.visual_budget, cfg.anchor_tokens) == (64, 8, 3)
    assert cfg.token_budget().sequence == 41


@pytest.mark.unit
def test_with_overrides_revalidates(micro_config):
    lite = micro_config.with_overrides({'mode': 'lite', 'pruning': False})
    assert lite.mode == 'lite' and lite.pruning is False
    assert lite.seed == micro_config.seed
    with pytest.raises(ConfigurationError):
        micro_config.with_overrides({'sparsity_ratio': 5})


@pytest.mark.unit
@pytest.mark.parametrize('overrides,field', [
    ({'sparsity_ratio': '5'}, 'sparsity_ratio'),
    ({'cue_tokens': '5'}, 'cue_tokens'),
    ({'cue_tokens': '4'}, 'cue_tokens'),
    ({'hook_depths': '0,2'}, 'hook_depths'),
    ({'hook_depths': '1,0'}, 'hook_depths'),
    ({'sem_width': '9'}, 'sem_width'),
    ({'decoder_heads': '3'}, 'decoder_width'),
    ({'num_objects': '5'}, 'num_objects'),
    ({'vocab_size': '11'}, 'vocab_size'),
    ({'mode': 'autoregressive'}, 'mode'),
    ({'agg_init': 'random'}, 'agg_init'),
    ({'bench_repetitions': '4'}, 'bench_repetitions'),
    ({'pruning': 'maybe'}, 'pruning'),
])
def test_serializer_rejects(micro_overrides, overrides, field):
    serializer = RunConfigSerializer(data={**micro_overrides, **overrides})
    assert not serializer.is_valid()
    assert field in serializer.errors


@pytest.mark.unit
def test_serializer_builds_typed_config(micro_overrides):
    serializer = RunConfigSerializer(data=micro_overrides)
    assert serializer.is_valid(), serializer.errors
    cfg = serializer.save()
    assert isinstance(cfg, RunConfig)
    assert cfg.hook_depths == (0, 1)
    assert cfg.learning_rate == 0.01
    assert cfg.noise_std == RunConfig.noise_std


@pytest.mark.unit
def test_empty_hook_depths(micro_overrides):
    cfg = build_run_config({**micro_overrides, 'hook_depths': ''})
    assert cfg.hook_depths == ()
    assert 'hook_depths = \n' in cfg.to_text()


@pytest.mark.unit
@pytest.mark.parametrize('name,visual,per_step', [('toy', 8, 3), ('lite', 4, 1), ('baseline', 64, 7)])
def test_shipped_presets(settings, name, visual, per_step):
    cfg = load_run_config(settings.BASE_DIR / 'configs' / f'{name}.cfg')
    budget = cfg.token_budget()
    assert (budget.visual_out, budget.action_per_step) == (visual, per_step)
