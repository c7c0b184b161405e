"""
Parallel action decoder and typed regression heads.

The decoder is a stack of bidirectional pre-norm blocks run once per chunk;
every placeholder position is read out in that single pass. Heads are
matched to placeholder types: a 3-D translation head, a 3-D rotation head
and a 1-D gripper head (or seven scalar heads in conventional mode).

Usage:
    from apps.decoding.decoder import ActionDecoder, chunk_loss

    decoder = ActionDecoder(DecoderConfig(chunk_len=8), text_width=32, rng=rng)
    chunk = decoder(z, proprio, instr_tokens)      # (..., K, 7 * arms)
    loss = chunk_loss(chunk, target)
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.decoding.coupler import CouplerMode, PlaceholderSet, SequenceBuilder
from apps.numerics import tensor as T
from apps.numerics.nn import Linear, Module, ModuleList, TransformerBlock, check_heads
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor
from apps.scenes.types import ACTION_DIM

logger = logging.getLogger(__name__)

GRIPPER_THRESHOLD = 0.5
# Head output widths per placeholder type in coupled/lite modes
TYPED_HEAD_DIMS = (('translation', 3), ('rotation', 3), ('gripper', 1))


@dataclass(frozen=True)
class DecoderConfig:
    layers: int = 2
    width: int = 64
    heads: int = 4
    chunk_len: int = 8
    arms: int = 1
    mode: CouplerMode = CouplerMode.COUPLED

    def validate(self) -> 'DecoderConfig':
        check_heads(self.width, self.heads)
        CouplerMode.parse(self.mode)
        if self.chunk_len < 1:
            raise ConfigurationError(f'chunk_len must be >= 1, got {self.chunk_len}')
        if self.arms < 1:
            raise ConfigurationError(f'arms must be >= 1, got {self.arms}')
        if self.layers < 0:
            raise ConfigurationError(f'decoder layers must be >= 0, got {self.layers}')
        return self


class ParallelDecoder(Module):
    """E bidirectional blocks; counts its forward passes."""

    def __init__(self, layers: int, width: int, heads: int, rng: Rng):
        super().__init__()
        self.blocks = ModuleList(TransformerBlock(width, heads, rng) for _ in range(layers))
        self.invocations = 0

    def forward(self, seq) -> Tensor:
        self.invocations += 1
        x = T.as_tensor(seq)
        for block in self.blocks:
            x = block(x)
        return x


def parallel_decode(seq, decoder: ParallelDecoder) -> Tensor:
    return decoder(seq)


class TypedHeads(Module):
    def __init__(self, width: int, mode, rng: Rng):
        super().__init__()
        self.mode = CouplerMode.parse(mode)
        if self.mode is CouplerMode.CONVENTIONAL:
            self.scalar = ModuleList(Linear(width, 1, rng) for _ in range(ACTION_DIM))
        else:
            self.translation = Linear(width, 3, rng)
            self.rotation = Linear(width, 3, rng)
            self.gripper = Linear(width, 1, rng)

    def forward(self, hidden, chunk_len: int, arms: int) -> Tensor:
        return decode_heads(hidden, self, chunk_len, arms)


def decode_heads(hidden, heads: TypedHeads, chunk_len: int, arms: int) -> Tensor:
    """
    Map placeholder hidden states to an action chunk.

    Args:
        hidden: (..., K * arms * tokens_per_step, d_l), laid out (step, arm, type)

    Returns:
        (..., K, 7 * arms) chunk; arm a occupies columns 7a .. 7a + 6

    Raises:
        ShapeError: row count does not match the layout
    """
    hidden = T.as_tensor(hidden)
    per_step = heads.mode.tokens_per_step
    expected = chunk_len * arms * per_step
    if hidden.shape[-2] != expected:
        raise ShapeError(
            f'placeholder layout mismatch: got {hidden.shape[-2]} rows, '
            f'expected {chunk_len} x {arms} x {per_step} = {expected}'
        )
    lead = hidden.shape[:-2]
    width = hidden.shape[-1]
    grid = T.reshape(hidden, lead + (chunk_len, arms, per_step, width))

    def token(u: int) -> Tensor:
        return T.reshape(T.slice_axis(grid, u, u + 1, axis=-2), lead + (chunk_len, arms, width))

    if heads.mode is CouplerMode.CONVENTIONAL:
        parts = [head(token(u)) for u, head in enumerate(heads.scalar)]
    elif heads.mode is CouplerMode.LITE:
        shared = token(0)
        parts = [heads.translation(shared), heads.rotation(shared), heads.gripper(shared)]
    else:
        parts = [heads.translation(token(0)), heads.rotation(token(1)), heads.gripper(token(2))]
    actions = T.concat(parts, axis=-1)
    return T.reshape(actions, lead + (chunk_len, ACTION_DIM * arms))


def chunk_loss(pred, target) -> Tensor:
    """
    Mean squared error over every chunk entry.

    Raises:
        ShapeError: shapes differ
    """
    pred, target = T.as_tensor(pred), T.as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f'chunk_loss shape mismatch: prediction {pred.shape} vs target {target.shape}')
    diff = T.sub(pred, target)
    return T.mean(T.mul(diff, diff))


def threshold_gripper(chunk: np.ndarray, arms: int = 1) -> np.ndarray:
    """Copy of `chunk` with each arm's gripper column snapped to {0, 1}."""
    chunk = np.array(chunk, dtype=np.float64)
    for arm in range(arms):
        column = ACTION_DIM * arm + ACTION_DIM - 1
        chunk[..., column] = (chunk[..., column] >= GRIPPER_THRESHOLD).astype(np.float64)
    return chunk


def tile_arms(chunk: np.ndarray, arms: int) -> np.ndarray:
    """Repeat a (..., K, 7) target for every arm."""
    return np.tile(np.asarray(chunk), (1,) * (np.ndim(chunk) - 1) + (arms,))


class ActionDecoder(Module):
    """Placeholders, sequence assembly, parallel decoder and heads."""

    def __init__(self, cfg: DecoderConfig, text_width: int, rng: Rng):
        super().__init__()
        self.cfg = cfg.validate()
        self.mode = CouplerMode.parse(cfg.mode)
        self.placeholders = PlaceholderSet(cfg.width, cfg.chunk_len, cfg.arms, self.mode, rng)
        self.sequence = SequenceBuilder(cfg.width, text_width, cfg.arms, rng)
        self.decoder = ParallelDecoder(cfg.layers, cfg.width, cfg.heads, rng)
        self.heads = TypedHeads(cfg.width, self.mode, rng)

    def forward(self, z, proprio, instr_tokens, step_code: np.ndarray = None) -> Tensor:
        placeholders = self.placeholders(step_code)
        seq = self.sequence(z, proprio, instr_tokens, placeholders)
        hidden = parallel_decode(seq, self.decoder)
        start = seq.shape[-2] - self.placeholders.count
        readout = T.slice_axis(hidden, start, seq.shape[-2], axis=-2)
        return decode_heads(readout, self.heads, self.cfg.chunk_len, self.cfg.arms)
