"""
Synthetic episode generator.

Scenes are patch grids holding a few domino-shaped objects of distinct types.
The instruction names a verb, the target object's type and a destination
quadrant at fixed positions, followed by distractor tokens. The ground-truth
chunk moves the end effector from its proprioceptive pose to the target's
centroid while rotating toward a verb-specific orientation, closing the
gripper halfway through.

Usage:
    from apps.scenes.synth import episode_from_seed, generate_episodes

    episode = episode_from_seed(7, SceneSpec())
    episodes = generate_episodes(seed=7, count=100, spec=SceneSpec())
"""

import logging
import math

import numpy as np

from apps.core.exceptions import PlacementError
from apps.numerics.rng import Rng
from apps.scenes.types import ACTION_DIM, NUM_DESTINATIONS, NUM_VERBS, VERB_ROTATIONS, Episode, SceneSpec

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


def place_objects(rng: Rng, spec: SceneSpec) -> list[list[tuple[int, int]]]:
    """
    Place `num_objects` dominoes on disjoint cells by rejection sampling.

    Returns:
        Per object, its two (row, col) cells

    Raises:
        PlacementError: an object could not be placed
    """
    side = spec.grid_side
    occupied: set[tuple[int, int]] = set()
    objects = []
    for index in range(spec.num_objects):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            row, col = (int(v) for v in rng.integers(0, side, (2,)))
            horizontal = bool(rng.integers(0, 2))
            other = (row, col + 1) if horizontal else (row + 1, col)
            cells = [(row, col), other]
            if other[0] >= side or other[1] >= side:
                continue
            if any(cell in occupied for cell in cells):
                continue
            occupied.update(cells)
            objects.append(cells)
            break
        else:
            raise PlacementError(
                f'could not place object {index} on a {side}x{side} grid',
                details={'object': index, 'grid_side': side},
            )
    return objects


def normalized_coordinate(index: float, side: int) -> float:
    """Map a grid index in [0, side-1] to [-1, 1]."""
    return 2.0 * index / (side - 1) - 1.0


def target_centroid(target_mask: np.ndarray, grid_side: int) -> np.ndarray:
    """Translation goal (x = column, y = row, z = 0) of the masked patches."""
    rows, cols = np.divmod(np.flatnonzero(target_mask), grid_side)
    return np.array([
        normalized_coordinate(cols.mean(), grid_side),
        normalized_coordinate(rows.mean(), grid_side),
        0.0,
    ])


def oracle_action_chunk(
    proprio: np.ndarray,
    target_mask: np.ndarray,
    verb: int,
    grid_side: int,
    chunk_len: int,
) -> np.ndarray:
    """
    Ground-truth K x 7 action chunk.

    Translation interpolates linearly from the proprio translation to the
    target centroid. Rotation follows (1 - cos(pi t)) / 2 from the proprio
    rotation to the verb's terminal rotation. Gripper is 0 before step
    ceil(K/2) and 1 from there on.
    """
    t = np.linspace(0.0, 1.0, chunk_len)[:, None]
    start = proprio[:3]
    goal = target_centroid(target_mask, grid_side)
    translation = start + t * (goal - start)
    # exact endpoints
    translation[0], translation[-1] = start, goal

    ramp = (1.0 - np.cos(math.pi * t)) / 2.0
    rotation = proprio[3:6] + ramp * (VERB_ROTATIONS[verb] - proprio[3:6])
    rotation[-1] = VERB_ROTATIONS[verb]

    gripper = (np.arange(chunk_len) >= math.ceil(chunk_len / 2)).astype(np.float64)[:, None]
    chunk = np.concatenate([translation, rotation, gripper], axis=1)
    assert chunk.shape == (chunk_len, ACTION_DIM)
    return chunk


def generate_episode(rng: Rng, spec: SceneSpec, seed: int = 0) -> Episode:
    """
    Draw one episode from `rng`.

    Args:
        rng: Generator consumed in a fixed order
        spec: Validated scene spec
        seed: Id recorded on the episode (also keys its patch noise)
    """
    objects = place_objects(rng, spec)
    types = rng.permutation(spec.object_types)[:spec.num_objects] + 1

    patch_types = np.zeros(spec.num_patches, dtype=np.int64)
    for cells, type_code in zip(objects, types):
        for row, col in cells:
            patch_types[row * spec.grid_side + col] = type_code

    target = int(rng.integers(0, spec.num_objects))
    target_mask = np.zeros(spec.num_patches, dtype=bool)
    for row, col in objects[target]:
        target_mask[row * spec.grid_side + col] = True

    verb = int(rng.integers(0, NUM_VERBS))
    destination = int(rng.integers(0, NUM_DESTINATIONS))
    instruction = np.empty(spec.instr_len, dtype=np.int64)
    instruction[0] = verb
    instruction[1] = spec.target_token(int(types[target]))
    instruction[2] = spec.destination_token_offset + destination
    instruction[3:] = rng.integers(spec.distractor_token_offset, spec.vocab_size, (spec.instr_len - 3,))

    proprio = np.concatenate([
        rng.uniform((3,), -1.0, 1.0),
        rng.uniform((3,), -0.5, 0.5),
        [0.0],
    ])
    chunk = oracle_action_chunk(proprio, target_mask, verb, spec.grid_side, spec.chunk_len)
    return Episode(
        patch_types=patch_types,
        instruction=instruction,
        proprio=proprio,
        target_mask=target_mask,
        action_chunk=chunk,
        seed=int(seed),
        cells=[cell for cells in objects for cell in cells],
    )


def episode_from_seed(seed: int, spec: SceneSpec) -> Episode:
    """The episode a given 64-bit seed always produces."""
    return generate_episode(Rng(seed), spec, seed=seed)


def episode_seeds(seed: int, count: int) -> list[int]:
    """Per-episode seeds drawn from a master stream."""
    master = Rng(seed)
    return [master.next_u64() for _ in range(count)]


def generate_episodes(seed: int, count: int, spec: SceneSpec) -> list[Episode]:
    spec.validate()
    episodes = [episode_from_seed(s, spec) for s in episode_seeds(seed, count)]
    logger.debug('Generated episodes', extra={'seed': seed, 'count': count})
    return episodes


def target_type(episode: Episode, spec: SceneSpec) -> int:
    """Type code named by the instruction's target token."""
    return spec.type_of_token(int(episode.instruction[1]))


def target_histogram(episodes, spec: SceneSpec) -> dict[int, int]:
    """Count of episodes per commanded object type (every type listed)."""
    counts = {code: 0 for code in range(1, spec.object_types + 1)}
    for episode in episodes:
        counts[target_type(episode, spec)] += 1
    return counts
