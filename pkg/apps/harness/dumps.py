"""
Attention and cue-word dumps for one episode.

Files written into the output directory:

    cue_<j>.pgm      patch weights of the j-th cue token (grid_side x grid_side)
    anchors.pgm      anchor selection mask, exactly h lit pixels
    agg_<a>.pgm      head-averaged attention of aggregation token a over patches
    anchors.csv      rank, patch, row, col, score, is_target
    saliency.csv     per instruction token: raw column sum, softmax-normalized
                     saliency (sums to 1), whether it was picked as a cue
    S.svt            similarity matrix, cue/anchor indices, saliency, weights

Usage:
    from apps.harness.dumps import dump_attention

    files = dump_attention(model, episode, 'runs/toy/attn')
"""

import logging
from pathlib import Path

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.core.svt1 import write_records
from apps.core.utils import write_csv, write_pgm
from apps.harness.pipeline import Batch, SemanticVLA

logger = logging.getLogger(__name__)

ANCHORS_HEADER = ('rank', 'patch', 'row', 'col', 'score', 'is_target')
SALIENCY_HEADER = ('position', 'token_id', 'saliency', 'normalized', 'selected')


def softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def anchor_mask(indices: np.ndarray, grid_side: int) -> np.ndarray:
    mask = np.zeros(grid_side * grid_side, dtype=np.uint8)
    mask[indices] = 255
    return mask.reshape(grid_side, grid_side)


def dump_attention(model: SemanticVLA, episode, out_dir) -> list[Path]:
    """
    Run one episode through the encoder and write its pruning diagnostics.

    Raises:
        ConfigurationError: the model was built with pruning disabled
    """
    cfg = model.cfg
    if not cfg.pruning:
        raise ConfigurationError('attention dumps need a model built with pruning = true')
    out_dir = Path(out_dir)
    side = cfg.grid_side
    encoded = model.encode(Batch.from_episodes([episode], cfg.arms), keep_attention=True)
    cues, anchors = encoded.cues, encoded.anchors
    similarity = encoded.similarity.values.data[0]
    cue_indices = cues.indices[0]
    anchor_indices = anchors.indices[0]
    saliency = cues.saliency[0]
    cue_weights = cues.weights[0]
    agg_attention = encoded.aggregation.attention[0]
    written = []

    for j, weights in enumerate(cue_weights):
        path = out_dir / f'cue_{j}.pgm'
        write_pgm(path, weights.reshape(side, side))
        written.append(path)

    path = out_dir / 'anchors.pgm'
    write_pgm(path, anchor_mask(anchor_indices, side))
    written.append(path)

    for a, weights in enumerate(agg_attention):
        path = out_dir / f'agg_{a}.pgm'
        write_pgm(path, weights.reshape(side, side))
        written.append(path)

    path = out_dir / 'anchors.csv'
    write_csv(path, ANCHORS_HEADER, (
        (rank, int(patch), int(patch) // side, int(patch) % side, float(anchors.scores[0][patch]),
         bool(episode.target_mask[patch]))
        for rank, patch in enumerate(anchor_indices)
    ))
    written.append(path)

    normalized = softmax(saliency)
    selected = set(cue_indices.tolist())
    path = out_dir / 'saliency.csv'
    write_csv(path, SALIENCY_HEADER, (
        (position, int(token), float(saliency[position]), float(normalized[position]), position in selected)
        for position, token in enumerate(episode.instruction)
    ))
    written.append(path)

    path = out_dir / 'S.svt'
    write_records(path, [
        ('S', similarity),
        ('cue_indices', cue_indices.astype(np.uint32)),
        ('anchor_indices', anchor_indices.astype(np.uint32)),
        ('saliency', saliency),
        ('cue_weights', cue_weights),
        ('agg_attention', agg_attention),
    ])
    written.append(path)

    logger.info(
        'Dumped attention',
        extra={'episode_seed': episode.seed, 'out_dir': str(out_dir), 'files': len(written)},
    )
    return written
