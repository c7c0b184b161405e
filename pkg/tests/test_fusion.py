"""
Tests for dense and sparse fusion and the assembly of the visual set Z.
"""

import numpy as np
import pytest

from apps.core.exceptions import ShapeError
from apps.encoders.towers import Tower, TowerConfig, tower_pair_forward
from apps.fusion.fuser import DenseFuser, DenseFusion, SparseFuser, VLProjector, assemble_z
from apps.numerics.nn import MLP
from apps.numerics.rng import Rng


def naive_mlp(x: np.ndarray, mlp: MLP) -> np.ndarray:
    h = x @ mlp.fc1.weight.data + mlp.fc1.bias.data
    h = 0.5 * h * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (h + 0.044715 * h ** 3)))
    return h @ mlp.fc2.weight.data + mlp.fc2.bias.data


def randomize_output_layer(mlp: MLP, rng: Rng) -> None:
    mlp.fc2.weight.assign(rng.normal(mlp.fc2.weight.shape, std=0.2))


@pytest.mark.unit
def test_untrained_dense_fuser_injects_nothing():
    fuser = DenseFuser(sem_width=8, spa_width=6, hidden=12, rng=Rng(0))
    inject_sig, inject_din, fused = fuser(Rng(1).normal((5, 8)), Rng(2).normal((5, 6)))
    assert inject_sig.shape == (5, 8) and inject_din.shape == (5, 6)
    assert not inject_sig.data.any() and not inject_din.data.any() and not fused.data.any()


@pytest.mark.oracle
def test_dense_fuser_matches_naive_concat_mlp():
    rng = Rng(3)
    fuser = DenseFuser(sem_width=8, spa_width=6, hidden=12, rng=rng)
    randomize_output_layer(fuser.mlp, rng)
    v_sig, v_din = rng.normal((5, 8)), rng.normal((5, 6))
    inject_sig, inject_din, fused = fuser(v_sig, v_din)
    expected = naive_mlp(np.concatenate([v_sig, v_din], axis=1), fuser.mlp)
    assert np.allclose(fused.data, expected, atol=1e-10, rtol=0)
    assert np.allclose(inject_sig.data, expected @ fuser.to_sem.weight.data, atol=1e-10, rtol=0)
    assert np.allclose(inject_din.data, expected @ fuser.to_spa.weight.data, atol=1e-10, rtol=0)


@pytest.mark.unit
def test_dense_fuser_row_mismatch():
    fuser = DenseFuser(8, 8, 8, Rng(0))
    with pytest.raises(ShapeError):
        fuser(np.zeros((4, 8)), np.zeros((3, 8)))


@pytest.mark.unit
def test_zeroed_dense_fusion_leaves_towers_bit_identical():
    cfg = TowerConfig(blocks=3, width=8, heads=2, hook_depths=(0, 2))
    sem, spa = Tower(cfg, Rng(4)), Tower(cfg, Rng(5))
    fusion = DenseFusion(cfg.hook_depths, 8, 8, 16, Rng(6))
    for fuser in fusion.fusers:
        randomize_output_layer(fuser.mlp, Rng(7))
    x_sem, x_spa = Rng(8).normal((16, 8)), Rng(9).normal((16, 8))

    plain_sem, plain_spa = tower_pair_forward(x_sem, x_spa, sem, spa)
    fused_sem, _ = tower_pair_forward(x_sem, x_spa, sem, spa, fusion.callback)
    assert not np.allclose(fused_sem.final.data, plain_sem.final.data)
    assert sorted(fusion.last_fused) == [0, 2]

    fusion.zero_outputs()
    zeroed_sem, zeroed_spa = tower_pair_forward(x_sem, x_spa, sem, spa, fusion.callback)
    assert np.array_equal(zeroed_sem.final.data, plain_sem.final.data)
    assert np.array_equal(zeroed_spa.final.data, plain_spa.final.data)


@pytest.mark.unit
def test_dense_fusion_couples_the_streams():
    cfg = TowerConfig(blocks=2, width=8, heads=2, hook_depths=(0,))
    sem, spa = Tower(cfg, Rng(10)), Tower(cfg, Rng(11))
    fusion = DenseFusion(cfg.hook_depths, 8, 8, 16, Rng(12))
    randomize_output_layer(fusion.fusers[0].mlp, Rng(13))
    x_sem = Rng(14).normal((16, 8))
    first, _ = tower_pair_forward(x_sem, Rng(15).normal((16, 8)), sem, spa, fusion.callback)
    second, _ = tower_pair_forward(x_sem, Rng(16).normal((16, 8)), sem, spa, fusion.callback)
    # the spatial input now reaches the semantic stream
    assert not np.allclose(first.final.data, second.final.data)


@pytest.mark.oracle
def test_sparse_fuser_matches_naive_concat_mlp():
    rng = Rng(17)
    fuser = SparseFuser(sem_width=8, spa_width=6, hidden=12, out_width=10, rng=rng)
    anchors, agg = rng.normal((3, 8)), rng.normal((3, 6))
    out = fuser(anchors, agg)
    expected = naive_mlp(np.concatenate([anchors, agg], axis=1), fuser.mlp)
    assert out.shape == (3, 10)
    assert np.allclose(out.data, expected, atol=1e-10, rtol=0)
    assert fuser(anchors[:1], agg[:1]).shape == (1, 10)


@pytest.mark.unit
def test_sparse_fuser_row_mismatch_names_both_counts():
    fuser = SparseFuser(8, 8, 8, 8, Rng(0))
    with pytest.raises(ShapeError) as exc:
        fuser(np.zeros((5, 8)), np.zeros((3, 8)))
    assert 'anchors have 5' in exc.value.message
    assert 'aggregation tokens have 3' in exc.value.message


@pytest.mark.unit
def test_z_is_cues_then_fused_anchors():
    rng = Rng(18)
    projector = VLProjector(8, 12, 10, rng)
    z_vl = projector(rng.normal((2, 8)))
    z_fusion = rng.normal((3, 10))
    z = assemble_z(z_vl, z_fusion)
    assert z.size == 5
    assert np.array_equal(z.combined.data[:2], z_vl.data)
    assert np.array_equal(z.combined.data[2:], z_fusion)
    with pytest.raises(ShapeError):
        assemble_z(z_vl, rng.normal((3, 9)))
