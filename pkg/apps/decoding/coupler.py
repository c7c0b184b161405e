"""
Action coupler: typed placeholders and decoder sequence assembly.

Each chunk step is represented by typed placeholder tokens whose count
depends on the mode:

    coupled       3 per step (translation, rotation, gripper)
    lite          1 per step (all three heads read the same token)
    conventional  7 per step (one per action dimension)

Placeholders are laid out (step, arm, type); the decoder sequence is
[Z | q | instruction | placeholders].
"""

from enum import Enum

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.encoders.towers import sinusoid
from apps.numerics import tensor as T
from apps.numerics.nn import Linear, Module, normal_param
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor
from apps.scenes.types import ACTION_DIM


class CouplerMode(str, Enum):
    COUPLED = 'coupled'
    LITE = 'lite'
    CONVENTIONAL = 'conventional'

    @property
    def tokens_per_step(self) -> int:
        return TOKENS_PER_STEP[self]

    @classmethod
    def parse(cls, value) -> 'CouplerMode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            choices = ', '.join(mode.value for mode in cls)
            raise ConfigurationError(f'unknown decoder mode {value!r} (expected one of {choices})') from None


TOKENS_PER_STEP = {CouplerMode.COUPLED: 3, CouplerMode.LITE: 1, CouplerMode.CONVENTIONAL: ACTION_DIM}


def coupler_token_count(chunk_len: int, arms: int, mode) -> int:
    """Action placeholder tokens per chunk."""
    return CouplerMode.parse(mode).tokens_per_step * chunk_len * arms


def sequence_length(z_rows: int, instr_len: int, chunk_len: int, arms: int, mode) -> int:
    return z_rows + 1 + instr_len + coupler_token_count(chunk_len, arms, mode)


class PlaceholderSet(Module):
    """Learned type embeddings (per arm) plus a fixed per-step sinusoidal code."""

    def __init__(self, width: int, chunk_len: int, arms: int, mode, rng: Rng):
        super().__init__()
        self.mode = CouplerMode.parse(mode)
        self.chunk_len = chunk_len
        self.arms = arms
        self.width = width
        self.types = normal_param(rng, (arms, self.mode.tokens_per_step, width), 'types')
        self.step_code = sinusoid(np.arange(chunk_len), width)

    @property
    def count(self) -> int:
        return coupler_token_count(self.chunk_len, self.arms, self.mode)

    def forward(self, step_code: np.ndarray = None) -> Tensor:
        """
        (count, width) placeholders, row index = (step * arms + arm) * tokens_per_step + type.

        `step_code` overrides the per-step code (rows = steps).
        """
        code = self.step_code if step_code is None else np.asarray(step_code)
        grid = T.add(
            T.reshape(self.types, (1,) + self.types.shape),
            code[:, None, None, :],
        )
        return T.reshape(grid, (self.count, self.width))


class SequenceBuilder(Module):
    """Learned maps putting q and the instruction tokens at decoder width."""

    def __init__(self, width: int, text_width: int, arms: int, rng: Rng):
        super().__init__()
        self.arms = arms
        self.q_proj = Linear(ACTION_DIM * arms, width, rng)
        self.instr_proj = Linear(text_width, width, rng)

    def forward(self, z, proprio, instr_tokens, placeholders) -> Tensor:
        return build_sequence(z, proprio, instr_tokens, placeholders, self)


def build_sequence(z, proprio, instr_tokens, placeholders, builder: SequenceBuilder) -> Tensor:
    """
    Assemble [Z | q token | instruction rows | placeholders].

    Args:
        z: (..., |Z|, d_l)
        proprio: (..., 7) one arm's state, repeated for every arm
        instr_tokens: (..., M, d_text)
        placeholders: (P, d_l), shared across the batch
    """
    z = T.as_tensor(z)
    width = z.shape[-1]
    lead = z.shape[:-2]
    proprio = np.asarray(proprio, dtype=np.float64)
    if proprio.shape[-1] != ACTION_DIM:
        raise ShapeError(f'proprio must have {ACTION_DIM} values, got shape {proprio.shape}')
    q_in = np.tile(proprio, builder.arms).reshape(lead + (1, ACTION_DIM * builder.arms))
    q_token = builder.q_proj(q_in)
    instr = builder.instr_proj(instr_tokens)
    placeholders = T.as_tensor(placeholders)
    if placeholders.shape[-1] != width:
        raise ShapeError(f'placeholders have width {placeholders.shape[-1]}, Z has {width}')
    if lead:
        placeholders = T.add(placeholders, np.zeros(lead + placeholders.shape))
    return T.concat([z, q_token, instr, placeholders], axis=-2)
