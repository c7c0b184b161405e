"""
Analytic compute and token accounting.

Convention: one multiply-accumulate is 2 FLOPs; softmax, normalisation
and activation costs are ignored. A transformer layer over s tokens of
width d with MLP ratio r costs

    8 s d^2       (Q, K, V and output projections)
  + 4 s^2 d       (scores and weighted sum)
  + 4 r s d^2     (two MLP matmuls)

Usage:
    from apps.efficiency.flops import token_budget, transformer_flops

    transformer_flops(s=41, d=64, layers=2)
    token_budget(num_patches=256, sparsity_ratio=8, instr_len=16, chunk_len=8)
"""

from dataclasses import dataclass, field

from apps.core.exceptions import ConfigurationError
from apps.decoding.coupler import CouplerMode, coupler_token_count

INSTRUCTION_BLOCKS = 2
MLP_RATIO = 4

# Reference-scale shapes used for the headline accounting
REFERENCE_PATCHES = 256
REFERENCE_WIDTH = 4096
REFERENCE_LAYERS = 32


def transformer_flops(s: int, d: int, layers: int, mlp_ratio: int = MLP_RATIO) -> int:
    """FLOPs of `layers` transformer layers over `s` tokens of width `d`."""
    per_layer = 8 * s * d * d + 4 * s * s * d + 4 * mlp_ratio * s * d * d
    return layers * per_layer


@dataclass(frozen=True)
class TokenBudget:
    visual_in: int
    visual_out: int
    action_per_step: int
    action_tokens: int
    instruction: int
    sequence: int

    @property
    def reduction(self) -> float:
        return self.visual_in / self.visual_out


def token_budget(
    num_patches: int,
    sparsity_ratio: int,
    instr_len: int,
    chunk_len: int,
    arms: int = 1,
    mode=CouplerMode.COUPLED,
    pruning: bool = True,
) -> TokenBudget:
    """
    Token counts for one configuration.

    With pruning off the decoder sees all N visual tokens.

    Raises:
        ConfigurationError: N is not divisible by R
    """
    mode = CouplerMode.parse(mode)
    if sparsity_ratio < 1 or num_patches % sparsity_ratio != 0:
        raise ConfigurationError(
            f'N={num_patches} is not divisible by sparsity ratio R={sparsity_ratio}',
            details={'N': num_patches, 'R': sparsity_ratio},
        )
    visual_out = num_patches // sparsity_ratio if pruning else num_patches
    actions = coupler_token_count(chunk_len, arms, mode)
    return TokenBudget(
        visual_in=num_patches,
        visual_out=visual_out,
        action_per_step=mode.tokens_per_step,
        action_tokens=actions,
        instruction=instr_len,
        sequence=visual_out + 1 + instr_len + actions,
    )


@dataclass(frozen=True)
class PipelineShape:
    """Everything the FLOPs model needs to know about a pipeline."""

    num_patches: int
    agg_tokens: int
    instr_len: int
    sequence: int
    sem_width: int
    spa_width: int
    text_width: int
    tower_blocks: int
    decoder_width: int
    decoder_layers: int
    agg_rounds: int = 1
    pruning: bool = True


@dataclass(frozen=True)
class StageFlops:
    stage: str
    seq_len: int
    width: int
    layers: int
    flops: int


@dataclass
class FlopsReport:
    config: str
    stages: list[StageFlops] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(stage.flops for stage in self.stages)

    def stage(self, name: str) -> StageFlops:
        for stage in self.stages:
            if stage.stage == name:
                return stage
        raise KeyError(name)

    @property
    def encode_flops(self) -> int:
        return self.total - self.stage('decoder').flops


def flops_report(shape: PipelineShape, config: str = '') -> FlopsReport:
    """Per-stage FLOPs; the spatial aggregation stage is attention-only (MLP ratio 0)."""
    agg_seq = shape.num_patches + shape.agg_tokens if shape.pruning else 0
    stages = [
        StageFlops('semantic_tower', shape.num_patches, shape.sem_width, shape.tower_blocks,
                   transformer_flops(shape.num_patches, shape.sem_width, shape.tower_blocks)),
        StageFlops('spatial_tower', shape.num_patches, shape.spa_width, shape.tower_blocks,
                   transformer_flops(shape.num_patches, shape.spa_width, shape.tower_blocks)),
        StageFlops('sa_attention', agg_seq, shape.spa_width, shape.agg_rounds,
                   transformer_flops(agg_seq, shape.spa_width, shape.agg_rounds, mlp_ratio=0)),
        StageFlops('instruction', shape.instr_len, shape.text_width, INSTRUCTION_BLOCKS,
                   transformer_flops(shape.instr_len, shape.text_width, INSTRUCTION_BLOCKS)),
        StageFlops('decoder', shape.sequence, shape.decoder_width, shape.decoder_layers,
                   transformer_flops(shape.sequence, shape.decoder_width, shape.decoder_layers)),
    ]
    return FlopsReport(config=config, stages=stages)


def flops_ratio(baseline: FlopsReport, sparsified: FlopsReport) -> float:
    """baseline / sparsified total FLOPs."""
    return baseline.total / sparsified.total


def reference_decoder_flops(
    sparsity_ratio: int,
    instr_len: int,
    chunk_len: int,
    mode=CouplerMode.COUPLED,
    pruning: bool = True,
    arms: int = 1,
) -> int:
    """Decoder-stage FLOPs at reference scale (256 patches, width 4096, 32 layers)."""
    budget = token_budget(REFERENCE_PATCHES, sparsity_ratio, instr_len, chunk_len, arms, mode, pruning)
    return transformer_flops(budget.sequence, REFERENCE_WIDTH, REFERENCE_LAYERS)
