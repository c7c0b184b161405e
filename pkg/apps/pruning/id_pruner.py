"""
Instruction-driven pruner.

Scores every visual token against every instruction token by cosine
similarity, then keeps two small groups:

- cue tokens: for each of the k most salient instruction tokens, a
  softmax-over-patches weighted sum of the visual tokens (global cues)
- anchor tokens: verbatim copies of the h visual tokens with the highest
  total response to the instruction (local anchors)

Selection is a hard top-k with ties resolved to the lower index, so the
result is a pure function of the scores. Gradients flow through the cue
weights and the copied anchor rows, not through the selection itself.

Usage:
    from apps.pruning.id_pruner import IDPruner

    pruner = IDPruner(visual_width=32, text_width=32, rng=Rng(0))
    cues, anchors = pruner(visual, instr_tokens, k=5, h=3)
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.numerics import tensor as T
from apps.numerics.nn import Module, normal_param
from apps.numerics.rng import Rng
from apps.numerics.tensor import NormCounter, Param, Tensor

logger = logging.getLogger(__name__)


@dataclass
class SimilarityMatrix:
    """S[..., i, j] = cosine(visual_i, W_l l_j); zero-norm rows count as 0."""

    values: Tensor  # (..., N, M)
    zero_norm_rows: int = 0


@dataclass
class CueTokens:
    indices: np.ndarray  # (..., k) instruction positions, descending saliency
    saliency: np.ndarray  # (..., M) column sums of S
    weights: np.ndarray  # (..., k, N) softmax over patches per selected column
    vectors: Tensor  # (..., k, d_v)


@dataclass
class AnchorTokens:
    indices: np.ndarray  # (..., h) patch positions, descending score
    scores: np.ndarray  # (..., N) row sums of S
    vectors: Tensor  # (..., h, d_v)


def top_indices(scores: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest scores along the last axis; ties go to the lower index."""
    return np.argsort(-scores, axis=-1, kind='stable')[..., :count]


def build_similarity(visual, instr, w_l: Param) -> SimilarityMatrix:
    """
    Cosine similarity between visual tokens and projected instruction tokens.

    Args:
        visual: (..., N, d_v)
        instr: (..., M, d_l)
        w_l: (d_v, d_l) projection; W_l l_j lives in the visual space

    Raises:
        ShapeError: widths do not match the projection
    """
    visual, instr = T.as_tensor(visual), T.as_tensor(instr)
    if w_l.shape != (visual.shape[-1], instr.shape[-1]):
        raise ShapeError(
            f'W_l has shape {w_l.shape}, expected {(visual.shape[-1], instr.shape[-1])}'
        )
    counter = NormCounter()
    projected = T.matmul(instr, T.transpose(w_l))
    v_hat = T.l2_normalize(visual, counter)
    l_hat = T.l2_normalize(projected, counter)
    S = T.matmul(v_hat, T.transpose(l_hat))
    if counter.zero_rows:
        logger.debug('Zero-norm tokens in similarity', extra={'zero_norm_rows': counter.zero_rows})
    return SimilarityMatrix(values=S, zero_norm_rows=counter.zero_rows)


def _similarity(S) -> Tensor:
    return S.values if isinstance(S, SimilarityMatrix) else T.as_tensor(S)


def vl_mapping(S, visual, k: int) -> CueTokens:
    """
    Vision-to-language mapping: one cue vector per selected instruction token.

    Raises:
        ConfigurationError: k outside [1, M]
    """
    S, visual = _similarity(S), T.as_tensor(visual)
    m = S.shape[-1]
    if not 1 <= k <= m:
        raise ConfigurationError(f'cue_tokens k={k} must lie in [1, M={m}]', details={'k': k, 'M': m})
    saliency = S.data.sum(axis=-2)
    indices = top_indices(saliency, k)
    columns = T.gather_rows(T.transpose(S), indices)
    weights = T.row_softmax(columns)
    return CueTokens(
        indices=indices,
        saliency=saliency,
        weights=weights.data,
        vectors=T.matmul(weights, visual),
    )


def lv_filtering(S, visual, h: int) -> AnchorTokens:
    """
    Language-to-vision filtering: copy the h visual tokens with the largest row sums.

    Raises:
        ConfigurationError: h outside [1, N]
    """
    S, visual = _similarity(S), T.as_tensor(visual)
    n = S.shape[-2]
    if not 1 <= h <= n:
        raise ConfigurationError(f'anchor count h={h} must lie in [1, N={n}]', details={'h': h, 'N': n})
    scores = S.data.sum(axis=-1)
    indices = top_indices(scores, h)
    return AnchorTokens(indices=indices, scores=scores, vectors=T.gather_rows(visual, indices))


def prune(visual, instr, w_l: Param, k: int, h: int) -> tuple[CueTokens, AnchorTokens, SimilarityMatrix]:
    """
    Run similarity, cue mapping and anchor filtering; k + h tokens survive.

    Returns:
        (cues, anchors, similarity)
    """
    visual, instr = T.as_tensor(visual), T.as_tensor(instr)
    n, m = visual.shape[-2], instr.shape[-2]
    if k + h > n + m:
        raise ConfigurationError(f'k + h = {k + h} exceeds N + M = {n + m}')
    S = build_similarity(visual, instr, w_l)
    return vl_mapping(S, visual, k), lv_filtering(S, visual, h), S


class IDPruner(Module):
    """Holds the trainable projection W_l."""

    def __init__(self, visual_width: int, text_width: int, rng: Rng):
        super().__init__()
        self.w_l = normal_param(rng, (visual_width, text_width), 'w_l')

    def identity_block_init(self) -> None:
        """Set W_l to the identity on the shared leading block of dimensions."""
        self.w_l.assign(np.eye(*self.w_l.shape))

    def forward(self, visual, instr, k: int, h: int):
        return prune(visual, instr, self.w_l, k, h)
