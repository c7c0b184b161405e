"""
Run configuration.

A run is described by a flat UTF-8 file of `key = value` lines; `#` starts a
comment. Every tunable has a default, so an empty file is a valid config.
Parsing only splits lines; typing, bounds and cross-field rules live in
RunConfigSerializer.

Usage:
    from apps.harness.config import load_run_config

    cfg = load_run_config('runs/toy.cfg', overrides=['sparsity_ratio=16'], seed=7)
    cfg.anchor_tokens   # N / R - cue_tokens
    print(cfg.to_text())
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from apps.core.exceptions import ConfigurationError
from apps.core.utils import format_cell
from apps.decoding.coupler import CouplerMode
from apps.decoding.decoder import DecoderConfig
from apps.efficiency.flops import PipelineShape, TokenBudget, token_budget
from apps.encoders.towers import TowerConfig
from apps.scenes.types import SceneSpec

logger = logging.getLogger(__name__)

AGG_INIT_CHOICES = ('zero', 'learned')


@dataclass(frozen=True)
class RunConfig:
    # reproducibility
    seed: int = 0
    # scene
    grid_side: int = 8
    num_objects: int = 3
    object_types: int = 6
    vocab_size: int = 64
    instr_len: int = 8
    chunk_len: int = 8
    arms: int = 1
    noise_std: float = 0.1
    # pruning
    sparsity_ratio: int = 8
    cue_tokens: int = 5
    pruning: bool = True
    agg_rounds: int = 1
    agg_init: str = 'zero'
    # encoders
    sem_width: int = 32
    spa_width: int = 32
    text_width: int = 32
    tower_blocks: int = 12
    tower_heads: int = 4
    hook_depths: tuple[int, ...] = (2, 6, 10)
    # fusion
    dense_fusion: bool = True
    fusion_hidden: int = 64
    # decoder
    decoder_layers: int = 2
    decoder_width: int = 64
    decoder_heads: int = 4
    mode: str = 'coupled'
    # optimisation
    learning_rate: float = 0.003
    steps: int = 2000
    batch_size: int = 32
    warmup_frac: float = 0.05
    eval_interval: int = 200
    train_count: int = 1024
    eval_count: int = 128
    bench_repetitions: int = 20

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    # Derived quantities

    @property
    def num_patches(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def visual_budget(self) -> int:
        """|Z| = N / R."""
        return self.num_patches // self.sparsity_ratio

    @property
    def anchor_tokens(self) -> int:
        """h = N / R - k."""
        return self.visual_budget - self.cue_tokens

    @property
    def agg_tokens(self) -> int:
        """A = h so anchors and aggregation rows pair up one to one."""
        return self.anchor_tokens

    @property
    def coupler_mode(self) -> CouplerMode:
        return CouplerMode.parse(self.mode)

    def scene_spec(self) -> SceneSpec:
        return SceneSpec(
            grid_side=self.grid_side,
            num_objects=self.num_objects,
            object_types=self.object_types,
            vocab_size=self.vocab_size,
            instr_len=self.instr_len,
            chunk_len=self.chunk_len,
            noise_std=self.noise_std,
        )

    def tower_config(self, width: int) -> TowerConfig:
        return TowerConfig(
            blocks=self.tower_blocks,
            width=width,
            heads=self.tower_heads,
            hook_depths=tuple(self.hook_depths),
        )

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            layers=self.decoder_layers,
            width=self.decoder_width,
            heads=self.decoder_heads,
            chunk_len=self.chunk_len,
            arms=self.arms,
            mode=self.coupler_mode,
        )

    def token_budget(self) -> TokenBudget:
        return token_budget(
            num_patches=self.num_patches,
            sparsity_ratio=self.sparsity_ratio,
            instr_len=self.instr_len,
            chunk_len=self.chunk_len,
            arms=self.arms,
            mode=self.coupler_mode,
            pruning=self.pruning,
        )

    def pipeline_shape(self) -> PipelineShape:
        return PipelineShape(
            num_patches=self.num_patches,
            agg_tokens=self.agg_tokens if self.pruning else 0,
            instr_len=self.instr_len,
            sequence=self.token_budget().sequence,
            sem_width=self.sem_width,
            spa_width=self.spa_width,
            text_width=self.text_width,
            tower_blocks=self.tower_blocks,
            decoder_width=self.decoder_width,
            decoder_layers=self.decoder_layers,
            agg_rounds=self.agg_rounds,
            pruning=self.pruning,
        )

    # Serialization

    def to_mapping(self) -> dict[str, str]:
        mapping = {}
        for key in self.keys():
            value = getattr(self, key)
            if key == 'hook_depths':
                mapping[key] = ','.join(str(depth) for depth in value)
            else:
                mapping[key] = format_cell(value)
        return mapping

    def to_text(self) -> str:
        """Every key, canonical order, one `key = value` line each."""
        return ''.join(f'{key} = {value}\n' for key, value in self.to_mapping().items())

    def with_overrides(self, overrides: Mapping[str, object]) -> 'RunConfig':
        """A re-validated copy with some keys replaced."""
        raw = self.to_mapping()
        for key, value in overrides.items():
            raw[key] = value if isinstance(value, str) else format_cell(value)
        return build_run_config(raw)


def parse_config_text(text: str) -> dict[str, str]:
    """
    Split `key = value` lines into a raw mapping.

    Raises:
        ConfigurationError: malformed line or duplicate key
    """
    raw: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigurationError(f'config line {number}: expected "key = value", got {line.strip()!r}')
        key, value = (part.strip() for part in content.split('=', 1))
        if not key:
            raise ConfigurationError(f'config line {number}: missing key')
        if key in raw:
            raise ConfigurationError(f'config line {number}: duplicate key {key!r}')
        raw[key] = value
    return raw


def apply_overrides(raw: dict[str, str], overrides: Iterable[str] = (), seed: int | None = None) -> dict[str, str]:
    """Apply `--set key=value` strings and an optional `--seed` to a raw mapping."""
    merged = dict(raw)
    for item in overrides or ():
        if '=' not in item:
            raise ConfigurationError(f'--set expects key=value, got {item!r}')
        key, value = (part.strip() for part in item.split('=', 1))
        merged[key] = value
    if seed is not None:
        merged['seed'] = str(seed)
    return merged


def build_run_config(raw: Mapping[str, object]) -> RunConfig:
    """Validate a raw mapping into a RunConfig."""
    from apps.harness.serializers import RunConfigSerializer

    serializer = RunConfigSerializer(data=dict(raw))
    if not serializer.is_valid():
        problems = '; '.join(
            f'{field}: {" ".join(str(m) for m in messages)}' for field, messages in serializer.errors.items()
        )
        raise ConfigurationError(f'invalid config: {problems}', details=dict(serializer.errors))
    return serializer.save()


def parse_run_config(text: str) -> RunConfig:
    return build_run_config(parse_config_text(text))


def load_run_config(path=None, overrides: Iterable[str] = (), seed: int | None = None) -> RunConfig:
    """
    Read, override and validate a config file (defaults when `path` is None).

    Raises:
        ConfigurationError: unknown keys, bad values or cross-field violations
        OSError: the file cannot be read
    """
    raw = parse_config_text(Path(path).read_text(encoding='utf-8')) if path else {}
    cfg = build_run_config(apply_overrides(raw, overrides, seed))
    logger.debug('Loaded run config', extra={'path': str(path) if path else None, 'seed': cfg.seed})
    return cfg
