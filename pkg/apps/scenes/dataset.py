"""
Episode datasets on disk.

A dataset is an SVT1 container holding, per episode i, the records
'ep<i>/seed', 'ep<i>/patch_types', 'ep<i>/instruction', 'ep<i>/proprio',
'ep<i>/target_mask' and 'ep<i>/action_chunk'. The 64-bit seed is stored as
two u32 words (low, high).

Usage:
    from apps.scenes.dataset import write_dataset, read_dataset

    write_dataset('data/train.svt', episodes)
    episodes = read_dataset('data/train.svt')
"""

import logging
import re

import numpy as np

from apps.core.exceptions import DataIntegrityError
from apps.core.svt1 import read_records, write_records
from apps.scenes.types import Episode

logger = logging.getLogger(__name__)

FIELDS = ('seed', 'patch_types', 'instruction', 'proprio', 'target_mask', 'action_chunk')
_RECORD_NAME = re.compile(r'^ep(\d+)/(\w+)$')


def split_seed(seed: int) -> np.ndarray:
    return np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint32)


def join_seed(words: np.ndarray) -> int:
    return int(words[0]) | (int(words[1]) << 32)


def episode_records(index: int, episode: Episode) -> list[tuple[str, np.ndarray]]:
    prefix = f'ep{index}/'
    return [
        (prefix + 'seed', split_seed(episode.seed)),
        (prefix + 'patch_types', episode.patch_types.astype(np.uint32)),
        (prefix + 'instruction', episode.instruction.astype(np.uint32)),
        (prefix + 'proprio', np.asarray(episode.proprio, dtype=np.float64)),
        (prefix + 'target_mask', episode.target_mask.astype(np.uint8)),
        (prefix + 'action_chunk', np.asarray(episode.action_chunk, dtype=np.float64)),
    ]


def write_dataset(path, episodes) -> int:
    """
    Write episodes to `path`.

    Returns:
        Number of episodes written
    """
    records = []
    for index, episode in enumerate(episodes):
        records.extend(episode_records(index, episode))
    write_records(path, records)
    count = len(records) // len(FIELDS)
    logger.info('Wrote dataset', extra={'path': str(path), 'episodes': count})
    return count


def episodes_from_records(records: dict[str, np.ndarray]) -> list[Episode]:
    """
    Rebuild episodes from parsed records.

    Raises:
        DataIntegrityError: unexpected record names or missing fields
    """
    grouped: dict[int, dict[str, np.ndarray]] = {}
    for name, array in records.items():
        match = _RECORD_NAME.match(name)
        if not match or match.group(2) not in FIELDS:
            raise DataIntegrityError(f'unexpected dataset record {name!r}', details={'record': name})
        grouped.setdefault(int(match.group(1)), {})[match.group(2)] = array

    episodes = []
    for expected, index in enumerate(sorted(grouped)):
        if index != expected:
            raise DataIntegrityError(f'dataset is missing episode {expected}')
        fields = grouped[index]
        missing = [name for name in FIELDS if name not in fields]
        if missing:
            raise DataIntegrityError(
                f'episode {index} is missing records {missing}',
                details={'episode': index, 'missing': missing},
            )
        episodes.append(Episode(
            patch_types=fields['patch_types'].astype(np.int64),
            instruction=fields['instruction'].astype(np.int64),
            proprio=fields['proprio'],
            target_mask=fields['target_mask'].astype(bool),
            action_chunk=fields['action_chunk'],
            seed=join_seed(fields['seed']),
        ))
    return episodes


def read_dataset(path) -> list[Episode]:
    """Read every episode stored at `path`."""
    episodes = episodes_from_records(read_records(path))
    logger.debug('Read dataset', extra={'path': str(path), 'episodes': len(episodes)})
    return episodes
