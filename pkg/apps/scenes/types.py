"""
Scene and episode types.

Usage:
    from apps.scenes.types import SceneSpec

    spec = SceneSpec(grid_side=8, num_objects=3)
    spec.validate()
"""

from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import ConfigurationError

ACTION_DIM = 7
NUM_VERBS = 4
NUM_DESTINATIONS = 4

# Terminal end-effector rotation per verb id
VERB_ROTATIONS = np.array([
    [0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.0, -0.5],
])


@dataclass(frozen=True)
class SceneSpec:
    """Shape of the synthetic task."""

    grid_side: int = 8
    num_objects: int = 3
    object_types: int = 6
    vocab_size: int = 64
    instr_len: int = 8
    chunk_len: int = 8
    noise_std: float = 0.1

    @property
    def num_patches(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def type_table_size(self) -> int:
        # code 0 is background
        return self.object_types + 1

    # Vocabulary layout: verbs, target types, destinations, distractors
    @property
    def target_token_offset(self) -> int:
        return NUM_VERBS

    @property
    def destination_token_offset(self) -> int:
        return NUM_VERBS + self.object_types

    @property
    def distractor_token_offset(self) -> int:
        return NUM_VERBS + self.object_types + NUM_DESTINATIONS

    def target_token(self, type_code: int) -> int:
        return self.target_token_offset + type_code - 1

    def type_of_token(self, token: int) -> int:
        return token - self.target_token_offset + 1

    def validate(self) -> 'SceneSpec':
        """
        Check the scene parameters against each other.

        Raises:
            ConfigurationError: on the first violated constraint
        """
        checks = [
            (self.grid_side >= 2, f'grid_side must be >= 2, got {self.grid_side}'),
            (self.num_objects >= 1, f'num_objects must be >= 1, got {self.num_objects}'),
            (
                self.num_objects * 4 <= self.num_patches,
                f'num_objects {self.num_objects} exceeds N/4 = {self.num_patches // 4}',
            ),
            (
                self.num_objects <= self.object_types,
                f'num_objects {self.num_objects} exceeds object_types {self.object_types}',
            ),
            (self.instr_len >= 3, f'instr_len must be >= 3, got {self.instr_len}'),
            (self.chunk_len >= 2, f'chunk_len must be >= 2, got {self.chunk_len}'),
            (
                self.vocab_size > self.distractor_token_offset,
                f'vocab_size {self.vocab_size} leaves no distractor ids '
                f'(needs > {self.distractor_token_offset})',
            ),
            (self.noise_std >= 0.0, f'noise_std must be >= 0, got {self.noise_std}'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        return self


@dataclass
class Episode:
    """One synthetic manipulation sample."""

    patch_types: np.ndarray
    instruction: np.ndarray
    proprio: np.ndarray
    target_mask: np.ndarray
    action_chunk: np.ndarray
    seed: int
    cells: list[tuple[int, int]] = field(default_factory=list, compare=False, repr=False)

    @property
    def num_patches(self) -> int:
        return int(self.patch_types.shape[0])

    @property
    def grid_side(self) -> int:
        return int(round(self.num_patches ** 0.5))

    @property
    def verb(self) -> int:
        return int(self.instruction[0])

    def target_indices(self) -> np.ndarray:
        return np.flatnonzero(self.target_mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Episode):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.patch_types, other.patch_types)
            and np.array_equal(self.instruction, other.instruction)
            and np.array_equal(self.proprio, other.proprio)
            and np.array_equal(self.target_mask, other.target_mask)
            and np.array_equal(self.action_chunk, other.action_chunk)
        )
