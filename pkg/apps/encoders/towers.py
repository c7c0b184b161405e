"""
Toy encoder towers.

Two pre-norm transformer stacks stand in for the semantic and spatial
vision encoders; a third, short stack embeds the instruction. A tower is
run as a generator that pauses after every hook block, hands out its
current tokens and accepts a residual injection before continuing. That
pause point is what the dense fuser plugs into.

Usage:
    from apps.encoders.towers import Tower, TowerConfig, tower_forward

    tower = Tower(TowerConfig(), rng=Rng(0))
    stack = tower_forward(patches, tower)                 # unfused
    stack = tower_forward(patches, tower, callback=fn)    # fn(depth, tokens) -> injection
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Generator, Sequence

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.numerics import tensor as T
from apps.numerics.nn import Embedding, Linear, Module, ModuleList, TransformerBlock, check_heads
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

SEMANTIC = 'sem'
SPATIAL = 'spa'
# Keys deriving each tower's patch-noise stream from the episode seed
ROLE_KEYS = {SEMANTIC: 0x53454D, SPATIAL: 0x535041}

INSTRUCTION_BLOCKS = 2


@dataclass(frozen=True)
class TowerConfig:
    blocks: int = 12
    width: int = 32
    heads: int = 4
    hook_depths: tuple[int, ...] = (2, 6, 10)

    def validate(self) -> 'TowerConfig':
        hooks = tuple(self.hook_depths)
        if self.blocks < 0:
            raise ConfigurationError(f'tower blocks must be >= 0, got {self.blocks}')
        if any(b <= a for a, b in zip(hooks, hooks[1:])):
            raise ConfigurationError(f'hook_depths must be strictly increasing, got {hooks}')
        if hooks and (hooks[0] < 0 or hooks[-1] >= self.blocks):
            raise ConfigurationError(f'hook_depths {hooks} must lie in [0, {self.blocks})')
        check_heads(self.width, self.heads)
        return self


@dataclass
class FeatureStack:
    """Per-hook snapshots (taken before injection) and the final tokens."""

    per_hook: dict[int, Tensor] = field(default_factory=dict)
    final: Tensor | None = None


@dataclass
class InstructionEmbedding:
    tokens: Tensor  # (..., M, d_text)
    pooled: Tensor  # (..., 1, d_spatial)


def sinusoid(positions: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal code: even columns sin, odd columns cos, geometric frequencies."""
    j = np.arange(dim)
    freq = 1.0 / np.power(10000.0, 2 * (j // 2) / max(dim, 1))
    angles = np.asarray(positions, dtype=np.float64)[:, None] * freq[None, :]
    return np.where(j % 2 == 0, np.sin(angles), np.cos(angles))


def grid_position_encoding(grid_side: int, width: int) -> np.ndarray:
    """Fixed 2-D code: row code in the first half of the features, column code in the second."""
    rows, cols = np.divmod(np.arange(grid_side * grid_side), grid_side)
    row_dim = width // 2
    return np.concatenate([sinusoid(rows, row_dim), sinusoid(cols, width - row_dim)], axis=1)


def patch_noise(seed: int, role: str, shape: tuple[int, int], std: float) -> np.ndarray:
    if std == 0.0:
        return np.zeros(shape)
    return Rng(seed).derive(ROLE_KEYS[role]).normal(shape, std=std)


class PatchEmbedder(Module):
    """Type-code table lookup + 2-D position code + per-episode Gaussian noise."""

    def __init__(self, type_count: int, width: int, grid_side: int, role: str, rng: Rng):
        super().__init__()
        self.role = role
        self.width = width
        self.grid_side = grid_side
        self.types = Embedding(type_count, width, rng)
        self.position = grid_position_encoding(grid_side, width)

    def forward(self, patch_types: np.ndarray, seeds: Sequence[int], noise_std: float) -> Tensor:
        """
        Args:
            patch_types: (B, N) type codes
            seeds: B episode seeds keying the noise
            noise_std: Noise standard deviation

        Returns:
            (B, N, width) patch tokens
        """
        patch_types = np.atleast_2d(patch_types)
        n = patch_types.shape[-1]
        if n != self.grid_side ** 2:
            raise ShapeError(f'expected {self.grid_side ** 2} patches, got {n}')
        noise = np.stack([patch_noise(int(s), self.role, (n, self.width), noise_std) for s in seeds])
        return T.add(self.types(patch_types), self.position + noise)


def embed_patches(episode, embedder: PatchEmbedder, noise_std: float) -> Tensor:
    """(N, width) tokens of one episode for the embedder's tower role."""
    out = embedder(episode.patch_types[None, :], [episode.seed], noise_std)
    return T.reshape(out, out.shape[1:])


class Tower(Module):
    """B pre-norm transformer blocks with hook points."""

    def __init__(self, cfg: TowerConfig, rng: Rng):
        super().__init__()
        self.cfg = cfg.validate()
        self.blocks = ModuleList(TransformerBlock(cfg.width, cfg.heads, rng) for _ in range(cfg.blocks))

    def stages(self, x: Tensor) -> Generator[tuple[int, Tensor], Tensor | None, FeatureStack]:
        """
        Run the blocks, yielding (depth, tokens) after each hook block.

        The value sent back is added to the tokens before the next block;
        None means no injection.
        """
        hooks = set(self.cfg.hook_depths)
        stack = FeatureStack()
        for depth, block in enumerate(self.blocks):
            x = block(x)
            if depth in hooks:
                stack.per_hook[depth] = x
                injection = yield depth, x
                if injection is not None:
                    if tuple(injection.shape) != tuple(x.shape):
                        raise ShapeError(
                            f'injection at depth {depth} has shape {injection.shape}, tokens have {x.shape}'
                        )
                    x = T.add(x, injection)
        stack.final = x
        return stack


HookCallback = Callable[[int, Tensor], Tensor | None]


def tower_forward(patches, tower: Tower, callback: HookCallback | None = None) -> FeatureStack:
    """Drive one tower to completion, injecting `callback(depth, tokens)` at hooks."""
    patches = T.as_tensor(patches)
    if patches.shape[-1] != tower.cfg.width:
        raise ShapeError(f'patches have width {patches.shape[-1]}, tower expects {tower.cfg.width}')
    run = tower.stages(patches)
    try:
        depth, tokens = next(run)
        while True:
            injection = callback(depth, tokens) if callback else None
            depth, tokens = run.send(injection)
    except StopIteration as done:
        return done.value


PairCallback = Callable[[int, Tensor, Tensor], tuple[Tensor, Tensor] | None]


def tower_pair_forward(
    sem_patches, spa_patches, sem_tower: Tower, spa_tower: Tower, callback: PairCallback | None = None
) -> tuple[FeatureStack, FeatureStack]:
    """
    Drive both towers in lockstep so block b of one meets block b of the other.

    `callback(depth, sem_tokens, spa_tokens)` returns the two injections or None.

    Raises:
        ConfigurationError: the towers do not share hook depths
    """
    if tuple(sem_tower.cfg.hook_depths) != tuple(spa_tower.cfg.hook_depths):
        raise ConfigurationError('paired towers must share hook_depths')
    sem_run = sem_tower.stages(T.as_tensor(sem_patches))
    spa_run = spa_tower.stages(T.as_tensor(spa_patches))
    try:
        sem_depth, sem_tokens = next(sem_run)
        _, spa_tokens = next(spa_run)
    except StopIteration as sem_done:
        # no hooks: the spatial generator finishes immediately too
        spa_stack = _finish(spa_run)
        return sem_done.value, spa_stack
    while True:
        injections = callback(sem_depth, sem_tokens, spa_tokens) if callback else None
        sem_inj, spa_inj = injections if injections is not None else (None, None)
        try:
            sem_depth, sem_tokens = sem_run.send(sem_inj)
        except StopIteration as sem_done:
            try:
                spa_run.send(spa_inj)
            except StopIteration as spa_done:
                return sem_done.value, spa_done.value
            raise ConfigurationError('paired towers ran out of sync')
        _, spa_tokens = spa_run.send(spa_inj)


def _finish(run) -> FeatureStack:
    try:
        next(run)
    except StopIteration as done:
        return done.value
    raise ConfigurationError('paired towers ran out of sync')


class InstructionEncoder(Module):
    """Token table + 1-D position code + two blocks; pooled = Linear(mean over tokens)."""

    def __init__(self, vocab_size: int, width: int, heads: int, pooled_width: int, instr_len: int, rng: Rng):
        super().__init__()
        self.vocab_size = vocab_size
        self.tokens = Embedding(vocab_size, width, rng)
        self.position = sinusoid(np.arange(instr_len), width)
        self.blocks = ModuleList(TransformerBlock(width, heads, rng) for _ in range(INSTRUCTION_BLOCKS))
        self.pool = Linear(width, pooled_width, rng)

    def forward(self, instruction: np.ndarray) -> InstructionEmbedding:
        """
        Args:
            instruction: (B, M) token ids

        Raises:
            ShapeError: an id is outside the vocabulary
        """
        instruction = np.atleast_2d(instruction)
        x = T.add(self.tokens(instruction), self.position[: instruction.shape[-1]])
        for block in self.blocks:
            x = block(x)
        pooled = self.pool(T.mean(x, axis=-2, keepdims=True))
        return InstructionEmbedding(tokens=x, pooled=pooled)


def embed_instruction(instruction: np.ndarray, encoder: InstructionEncoder) -> InstructionEmbedding:
    return encoder(instruction)
