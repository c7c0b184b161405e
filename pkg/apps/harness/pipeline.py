"""
End-to-end sparsification-and-action pipeline.

    patches -> semantic tower --+-- dense fusion at hook depths --+
    patches -> spatial tower  --+                                 |
    instruction -> instruction encoder (tokens, pooled)           |
    semantic final + instruction -> ID pruner -> cues, anchors    |
    spatial final + pooled -> SA pruner -> aggregation rows   <---+
    Z = [VL(cues); SparseFuse(anchors, aggregation)]
    [Z | q | instruction | placeholders] -> parallel decoder -> heads -> chunk

With `pruning = false` both pruners are skipped and the sparse fuser runs
over all N token pairs (the dense baseline). With `dense_fusion = false`
the towers run unfused.

Parameters are grouped under 'tower.sem', 'tower.spa', 'instr',
'id_pruner', 'sa_pruner', 'fuser' and 'decoder'; each group is initialized
from its own child stream of the run seed, so switching a variant off does
not change the initialization of the rest.

Usage:
    from apps.harness.pipeline import SemanticVLA, Batch

    model = SemanticVLA(cfg)
    out = model(Batch.from_episodes(episodes, cfg.arms))
    loss = chunk_loss(out.chunk, batch.target)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from apps.decoding.decoder import ActionDecoder, tile_arms
from apps.encoders.towers import (
    SEMANTIC,
    SPATIAL,
    FeatureStack,
    InstructionEmbedding,
    InstructionEncoder,
    PatchEmbedder,
    Tower,
    tower_pair_forward,
)
from apps.fusion.fuser import DenseFusion, FusedVisualSet, SparseFuser, VLProjector, assemble_z
from apps.harness.config import RunConfig
from apps.numerics.nn import Module
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor
from apps.pruning.id_pruner import AnchorTokens, CueTokens, IDPruner, SimilarityMatrix, prune
from apps.pruning.sa_pruner import AggregationResult, SAPruner

logger = logging.getLogger(__name__)

# Child-stream keys for parameter initialization
INIT_KEYS = {
    'tower.sem': 1,
    'tower.spa': 2,
    'instr': 3,
    'id_pruner': 4,
    'sa_pruner': 5,
    'fuser': 6,
    'decoder': 7,
}


@dataclass
class Batch:
    """Stacked model inputs and targets for a list of episodes."""

    patch_types: np.ndarray  # (B, N)
    seeds: list[int]
    instruction: np.ndarray  # (B, M)
    proprio: np.ndarray  # (B, 7)
    target: np.ndarray  # (B, K, 7 * arms)
    target_mask: np.ndarray  # (B, N)

    @classmethod
    def from_episodes(cls, episodes, arms: int = 1) -> 'Batch':
        return cls(
            patch_types=np.stack([e.patch_types for e in episodes]),
            seeds=[e.seed for e in episodes],
            instruction=np.stack([e.instruction for e in episodes]),
            proprio=np.stack([e.proprio for e in episodes]),
            target=tile_arms(np.stack([e.action_chunk for e in episodes]), arms),
            target_mask=np.stack([e.target_mask for e in episodes]),
        )

    def __len__(self) -> int:
        return len(self.seeds)


@dataclass
class Encoded:
    """Everything the decoder needs plus pruning diagnostics."""

    z: FusedVisualSet
    instruction: InstructionEmbedding
    proprio: np.ndarray
    sem_stack: FeatureStack
    spa_stack: FeatureStack
    cues: CueTokens | None = None
    anchors: AnchorTokens | None = None
    similarity: SimilarityMatrix | None = None
    aggregation: AggregationResult | None = None


@dataclass
class PipelineOutput:
    chunk: Tensor  # (B, K, 7 * arms)
    encoded: Encoded


class EncoderTower(Module):
    """Patch embedder plus transformer tower for one role."""

    def __init__(self, cfg: RunConfig, width: int, role: str, rng: Rng):
        super().__init__()
        self.embed = PatchEmbedder(cfg.scene_spec().type_table_size, width, cfg.grid_side, role, rng)
        self.tower = Tower(cfg.tower_config(width), rng)


class FuserStack(Module):
    def __init__(self, cfg: RunConfig, rng: Rng):
        super().__init__()
        self.has_dense = cfg.dense_fusion
        # one child stream per submodule
        if cfg.dense_fusion:
            self.dense = DenseFusion(
                cfg.hook_depths, cfg.sem_width, cfg.spa_width, cfg.fusion_hidden, rng.derive(1),
            )
        self.sparse = SparseFuser(cfg.sem_width, cfg.spa_width, cfg.fusion_hidden, cfg.decoder_width, rng.derive(2))
        if cfg.pruning:
            self.vl = VLProjector(cfg.sem_width, cfg.fusion_hidden, cfg.decoder_width, rng.derive(3))


class SemanticVLA(Module):
    """The full model for one RunConfig."""

    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.cfg = cfg
        root = Rng(cfg.seed)

        def child(name: str) -> Rng:
            return root.derive(INIT_KEYS[name])

        self._attach('sem', 'tower.sem', EncoderTower(cfg, cfg.sem_width, SEMANTIC, child('tower.sem')))
        self._attach('spa', 'tower.spa', EncoderTower(cfg, cfg.spa_width, SPATIAL, child('tower.spa')))
        self._attach('instr', 'instr', InstructionEncoder(
            cfg.vocab_size, cfg.text_width, cfg.tower_heads, cfg.spa_width, cfg.instr_len, child('instr'),
        ))
        if cfg.pruning:
            self._attach('id_pruner', 'id_pruner', IDPruner(cfg.sem_width, cfg.text_width, child('id_pruner')))
            self._attach('sa_pruner', 'sa_pruner', SAPruner(
                cfg.spa_width,
                cfg.tower_heads,
                cfg.agg_tokens,
                child('sa_pruner'),
                rounds=cfg.agg_rounds,
                learned_init=cfg.agg_init == 'learned',
            ))
        self._attach('fuser', 'fuser', FuserStack(cfg, child('fuser')))
        self._attach('decoder', 'decoder', ActionDecoder(cfg.decoder_config(), cfg.text_width, child('decoder')))

    def _attach(self, attr: str, name: str, module: Module) -> None:
        self.add_module(name, module)
        object.__setattr__(self, attr, module)

    @property
    def invocations(self) -> int:
        return self.decoder.decoder.invocations

    def encode(self, batch: Batch, keep_attention: bool = False) -> Encoded:
        cfg = self.cfg
        sem_in = self.sem.embed(batch.patch_types, batch.seeds, cfg.noise_std)
        spa_in = self.spa.embed(batch.patch_types, batch.seeds, cfg.noise_std)
        callback = self.fuser.dense.callback if self.fuser.has_dense else None
        sem_stack, spa_stack = tower_pair_forward(sem_in, spa_in, self.sem.tower, self.spa.tower, callback)
        instruction = self.instr(batch.instruction)

        if not cfg.pruning:
            fused = self.fuser.sparse(sem_stack.final, spa_stack.final)
            empty = Tensor(np.zeros(fused.shape[:-2] + (0, fused.shape[-1])))
            z = FusedVisualSet(z_vl=empty, z_fusion=fused, combined=fused)
            return Encoded(z=z, instruction=instruction, proprio=batch.proprio, sem_stack=sem_stack, spa_stack=spa_stack)

        cues, anchors, similarity = prune(
            sem_stack.final, instruction.tokens, self.id_pruner.w_l, cfg.cue_tokens, cfg.anchor_tokens,
        )
        aggregation = self.sa_pruner(spa_stack.final, instruction.pooled, keep_attention=keep_attention)
        z = assemble_z(self.fuser.vl(cues.vectors), self.fuser.sparse(anchors.vectors, aggregation.tokens))
        return Encoded(
            z=z,
            instruction=instruction,
            proprio=batch.proprio,
            sem_stack=sem_stack,
            spa_stack=spa_stack,
            cues=cues,
            anchors=anchors,
            similarity=similarity,
            aggregation=aggregation,
        )

    def decode(self, encoded: Encoded, step_code: np.ndarray = None) -> Tensor:
        return self.decoder(encoded.z.combined, encoded.proprio, encoded.instruction.tokens, step_code=step_code)

    def forward(self, batch: Batch, keep_attention: bool = False) -> PipelineOutput:
        encoded = self.encode(batch, keep_attention=keep_attention)
        return PipelineOutput(chunk=self.decode(encoded), encoded=encoded)


def zero_dense_fusion(model: SemanticVLA) -> None:
    """Zero every dense fuser's output layer (the model then behaves as unfused)."""
    if model.fuser.has_dense:
        model.fuser.dense.zero_outputs()
