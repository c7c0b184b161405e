"""
Spatial-aggregation pruner.

Appends A aggregation rows to the spatial tower's tokens, runs self-attention
over the whole set with FiLM modulation conditioned on the pooled
instruction, and keeps only the aggregation rows:

    (gamma, beta) = Linear(pooled)
    x <- (1 + gamma) * Attn(x) + beta      (per round, broadcast over rows)

Aggregation rows start at zero on every forward pass. With
`learned_init=True` they start from a trainable register table instead.

Usage:
    from apps.pruning.sa_pruner import SAPruner

    pruner = SAPruner(width=32, heads=4, count=3, rng=Rng(0))
    result = pruner(spatial_tokens, pooled)
    result.tokens  # (..., A, d)
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.numerics import tensor as T
from apps.numerics.nn import Linear, Module, MultiHeadAttention, zero_param
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class FilmParams:
    gamma: Tensor  # (..., 1, d)
    beta: Tensor  # (..., 1, d)


@dataclass
class AggregationResult:
    tokens: Tensor  # (..., A, d)
    attention: np.ndarray | None  # (..., A, N) head-averaged, last round


def append_agg(tokens, count: int, init=None) -> Tensor:
    """
    Append `count` aggregation rows (zeros unless `init` is given).

    Raises:
        ConfigurationError: count < 1
    """
    tokens = T.as_tensor(tokens)
    if count < 1:
        raise ConfigurationError('aggregation count A must be >= 1', details={'A': count})
    if init is None:
        agg = np.zeros(tokens.shape[:-2] + (count, tokens.shape[-1]))
        return T.concat([tokens, agg], axis=-2)
    init = T.as_tensor(init)
    if init.shape[-2:] != (count, tokens.shape[-1]):
        raise ShapeError(f'aggregation init has shape {init.shape}, expected (..., {count}, {tokens.shape[-1]})')
    lead = tokens.shape[:-2]
    if init.ndim < tokens.ndim and lead:
        init = T.add(init, np.zeros(lead + init.shape))
    return T.concat([tokens, init], axis=-2)


def film_params(pooled, film: Linear) -> FilmParams:
    """
    One affine map from the pooled instruction to [gamma; beta].

    Raises:
        ShapeError: pooled width does not match the FiLM generator
    """
    pooled = T.as_tensor(pooled)
    if pooled.shape[-1] != film.d_in:
        raise ShapeError(f'FiLM expects pooled width {film.d_in}, got {pooled.shape}')
    if pooled.ndim == 1:
        pooled = T.reshape(pooled, (1, pooled.shape[0]))
    out = film(pooled)
    width = film.d_out // 2
    return FilmParams(gamma=T.slice_axis(out, 0, width, axis=-1), beta=T.slice_axis(out, width, 2 * width, axis=-1))


def modulated_attention(
    tokens,
    film: FilmParams,
    attention: Callable,
    rounds: int = 1,
) -> Tensor:
    """
    Apply `rounds` of (1 + gamma) * attention(x) + beta.

    `attention` maps (..., s, d) tokens to (..., s, d).
    """
    if rounds < 1:
        raise ConfigurationError(f'aggregation rounds must be >= 1, got {rounds}')
    x = T.as_tensor(tokens)
    for _ in range(rounds):
        x = T.add(T.mul(T.add(film.gamma, 1.0), attention(x)), film.beta)
    return x


def extract_agg(tokens, count: int) -> Tensor:
    """
    The last `count` rows, in order.

    Raises:
        ShapeError: count exceeds the row count
    """
    tokens = T.as_tensor(tokens)
    rows = tokens.shape[-2]
    if count > rows or count < 1:
        raise ShapeError(f'cannot extract {count} aggregation rows from {rows} rows')
    return T.slice_axis(tokens, rows - count, rows, axis=-2)


class SAPruner(Module):
    """FiLM generator, attention weights and optional register table."""

    def __init__(self, width: int, heads: int, count: int, rng: Rng, rounds: int = 1, learned_init: bool = False):
        super().__init__()
        if count < 1:
            raise ConfigurationError('aggregation count A must be >= 1', details={'A': count})
        self.width = width
        self.count = count
        self.rounds = rounds
        self.learned_init = learned_init
        self.film = Linear(width, 2 * width, rng)
        self.attn = MultiHeadAttention(width, heads, rng)
        if learned_init:
            self.registers = zero_param((count, width), 'registers')

    def forward(self, spatial, pooled, keep_attention: bool = False) -> AggregationResult:
        spatial = T.as_tensor(spatial)
        n = spatial.shape[-2]
        x = append_agg(spatial, self.count, self.registers if self.learned_init else None)
        film = film_params(pooled, self.film)
        captured = {}

        def attention(tokens):
            out, weights = self.attn(tokens, return_weights=True)
            captured['weights'] = weights
            return out

        x = modulated_attention(x, film, attention, self.rounds)
        attention_map = None
        if keep_attention:
            # aggregation rows attending to patch columns, averaged over heads
            attention_map = captured['weights'][..., n:, :n].mean(axis=-3)
        return AggregationResult(tokens=extract_agg(x, self.count), attention=attention_map)
