"""
Hierarchical dual-stream fusion.

Dense fusion runs at every hook depth: both towers' patch tokens are
concatenated on the feature axis, mixed by an MLP and projected back into
each tower as a residual injection. The MLP's output layer starts at zero,
so an untrained fuser leaves both towers untouched.

Sparse fusion runs once, after pruning: the h anchor tokens and the h
aggregation tokens are concatenated row by row and mapped to the decoder
width. Cue tokens get their own projection. The decoder's visual set is
Z = [projected cues; fused anchors], in that order.

Usage:
    from apps.fusion.fuser import DenseFusion, SparseFuser, assemble_z

    fusion = DenseFusion(hook_depths=(2, 6, 10), sem_width=32, spa_width=32, hidden=64, rng=rng)
    sem_stack, spa_stack = tower_pair_forward(sem, spa, sem_tower, spa_tower, fusion.callback)
"""

from dataclasses import dataclass

from apps.core.exceptions import ShapeError
from apps.numerics import tensor as T
from apps.numerics.nn import MLP, Linear, Module, ModuleList
from apps.numerics.rng import Rng
from apps.numerics.tensor import Tensor


@dataclass
class FusedVisualSet:
    z_vl: Tensor  # (..., k, d_l)
    z_fusion: Tensor  # (..., h, d_l)
    combined: Tensor  # (..., k + h, d_l)

    @property
    def size(self) -> int:
        return self.combined.shape[-2]


class DenseFuser(Module):
    """One hook's concat -> MLP -> per-tower projections."""

    def __init__(self, sem_width: int, spa_width: int, hidden: int, rng: Rng):
        super().__init__()
        self.mlp = MLP(sem_width + spa_width, hidden, sem_width, rng, zero_output=True)
        self.to_sem = Linear(sem_width, sem_width, rng, bias=False)
        self.to_spa = Linear(sem_width, spa_width, rng, bias=False)

    def zero_output(self) -> None:
        self.mlp.fc2.weight.assign(self.mlp.fc2.weight.data * 0.0)
        self.mlp.fc2.bias.assign(self.mlp.fc2.bias.data * 0.0)

    def forward(self, v_sig, v_din) -> tuple[Tensor, Tensor, Tensor]:
        return dense_fuse(v_sig, v_din, self)


def dense_fuse(v_sig, v_din, fuser: DenseFuser) -> tuple[Tensor, Tensor, Tensor]:
    """
    Returns:
        (inject_sig, inject_din, fused) where fused is the MLP output

    Raises:
        ShapeError: the two streams have different row counts
    """
    v_sig, v_din = T.as_tensor(v_sig), T.as_tensor(v_din)
    if v_sig.shape[-2] != v_din.shape[-2]:
        raise ShapeError(
            f'dense fusion row mismatch: semantic {v_sig.shape[-2]} vs spatial {v_din.shape[-2]}'
        )
    fused = fuser.mlp(T.concat([v_sig, v_din], axis=-1))
    return fuser.to_sem(fused), fuser.to_spa(fused), fused


class DenseFusion(Module):
    """A DenseFuser per hook depth, exposed as a paired-tower callback."""

    def __init__(self, hook_depths, sem_width: int, spa_width: int, hidden: int, rng: Rng):
        super().__init__()
        self.hook_depths = tuple(hook_depths)
        self.fusers = ModuleList(DenseFuser(sem_width, spa_width, hidden, rng) for _ in self.hook_depths)
        self.last_fused: dict[int, Tensor] = {}

    def zero_outputs(self) -> None:
        for fuser in self.fusers:
            fuser.zero_output()

    def callback(self, depth: int, sem_tokens: Tensor, spa_tokens: Tensor) -> tuple[Tensor, Tensor]:
        fuser = self.fusers[self.hook_depths.index(depth)]
        inject_sig, inject_din, fused = fuser(sem_tokens, spa_tokens)
        self.last_fused[depth] = fused
        return inject_sig, inject_din


class SparseFuser(Module):
    def __init__(self, sem_width: int, spa_width: int, hidden: int, out_width: int, rng: Rng):
        super().__init__()
        self.mlp = MLP(sem_width + spa_width, hidden, out_width, rng)

    def forward(self, anchors, agg) -> Tensor:
        return sparse_fuse(anchors, agg, self)


def sparse_fuse(anchors, agg, fuser: SparseFuser) -> Tensor:
    """
    Row-wise concat of anchors and aggregation tokens, then MLP to d_l.

    Raises:
        ShapeError: the two inputs differ in row count (message names both)
    """
    anchors, agg = T.as_tensor(anchors), T.as_tensor(agg)
    if anchors.shape[-2] != agg.shape[-2]:
        raise ShapeError(
            f'sparse fusion needs equal row counts: anchors have {anchors.shape[-2]}, '
            f'aggregation tokens have {agg.shape[-2]}',
            details={'anchors': anchors.shape[-2], 'aggregation': agg.shape[-2]},
        )
    return fuser.mlp(T.concat([anchors, agg], axis=-1))


class VLProjector(Module):
    def __init__(self, in_width: int, hidden: int, out_width: int, rng: Rng):
        super().__init__()
        self.mlp = MLP(in_width, hidden, out_width, rng)

    def forward(self, cues) -> Tensor:
        return project_vl(cues, self)


def project_vl(cues, projector: VLProjector) -> Tensor:
    return projector.mlp(cues)


def assemble_z(z_vl, z_fusion) -> FusedVisualSet:
    """
    Concatenate [z_vl; z_fusion] along the row axis.

    Raises:
        ShapeError: widths differ
    """
    z_vl, z_fusion = T.as_tensor(z_vl), T.as_tensor(z_fusion)
    if z_vl.shape[-1] != z_fusion.shape[-1]:
        raise ShapeError(f'Z width mismatch: cues {z_vl.shape} vs fused {z_fusion.shape}')
    return FusedVisualSet(z_vl=z_vl, z_fusion=z_fusion, combined=T.concat([z_vl, z_fusion], axis=-2))
