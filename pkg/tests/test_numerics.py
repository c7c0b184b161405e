"""
Tests for the tensor engine, parameter modules, optimizer and gradient checker.

Forward primitives are compared against naive loop implementations;
backward passes against central finite differences.
"""

import math

import numpy as np
import pytest

from apps.core.exceptions import CheckpointMismatchError, ConfigurationError, ShapeError
from apps.numerics import tensor as T
from apps.numerics.gradcheck import grad_check, gradient_errors, relative_error
from apps.numerics.nn import Linear, MultiHeadAttention, TransformerBlock, multi_head_attention
from apps.numerics.optim import Adam, warmup_cosine_lr, warmup_steps
from apps.numerics.rng import Rng, mix64
from apps.numerics.tensor import NormCounter, Param


def random_array(rng: Rng, shape) -> np.ndarray:
    return rng.uniform(shape, -2.0, 2.0)


# Rng

@pytest.mark.unit
def test_rng_matches_reference_splitmix64_stream():
    rng = Rng(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


@pytest.mark.unit
def test_rng_array_draws_equal_repeated_scalar_draws():
    scalar, block = Rng(123), Rng(123)
    expected = [scalar.next_u64() for _ in range(10)]
    assert [int(v) for v in block.u64_array(10)] == expected
    assert scalar.state == block.state


@pytest.mark.unit
def test_rng_same_seed_same_stream():
    assert np.array_equal(Rng(7).normal((4, 5)), Rng(7).normal((4, 5)))
    assert not np.array_equal(Rng(7).normal((4, 5)), Rng(8).normal((4, 5)))


@pytest.mark.unit
def test_rng_ranges():
    rng = Rng(5)
    u = rng.uniform((1000,), -1.0, 1.0)
    assert u.min() >= -1.0 and u.max() < 1.0
    ints = rng.integers(3, 9, (1000,))
    assert ints.min() == 3 and ints.max() == 8
    assert sorted(rng.permutation(10).tolist()) == list(range(10))
    with pytest.raises(ValueError):
        rng.integers(4, 4)


@pytest.mark.unit
def test_rng_derive_does_not_advance_parent():
    rng = Rng(99)
    state = rng.state
    child_a = rng.derive(1)
    child_b = rng.derive(2)
    assert rng.state == state
    assert child_a.next_u64() != child_b.next_u64()
    assert Rng(99).derive(1).next_u64() == Rng(99).derive(1).next_u64()


@pytest.mark.unit
def test_mix64_stays_in_64_bits():
    assert 0 <= mix64((1 << 70) + 5) < (1 << 64)


# Forward oracles

@pytest.mark.oracle
def test_matmul_matches_triple_loop():
    rng = Rng(1)
    a, b = random_array(rng, (5, 4)), random_array(rng, (4, 3))
    expected = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for p in range(4):
                expected[i, j] += a[i, p] * b[p, j]
    assert np.allclose(T.matmul(a, b).data, expected, atol=1e-12, rtol=0)


@pytest.mark.unit
def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as exc:
        T.matmul(np.zeros((2, 3)), np.zeros((4, 5)))
    assert '(2, 3)' in exc.value.message and '(4, 5)' in exc.value.message


@pytest.mark.oracle
def test_row_softmax_matches_loop():
    rng = Rng(2)
    x = random_array(rng, (6, 8))
    out = T.row_softmax(x).data
    for i in range(6):
        e = [math.exp(v) for v in x[i]]
        total = sum(e)
        for j in range(8):
            assert out[i, j] == pytest.approx(e[j] / total, abs=1e-12)


@pytest.mark.unit
def test_row_softmax_is_stable_for_large_inputs():
    out = T.row_softmax(np.array([[1000.0, 1000.0, -1000.0]])).data
    assert np.allclose(out, [[0.5, 0.5, 0.0]])


@pytest.mark.unit
def test_row_softmax_ignores_a_per_row_constant():
    rng = Rng(4)
    x = random_array(rng, (5, 7))
    shift = random_array(rng, (5, 1)) * 10.0
    out = T.row_softmax(x).data
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-9)
    assert np.abs(T.row_softmax(x + shift).data - out).max() <= 1e-9


@pytest.mark.oracle
def test_layer_norm_matches_loop():
    rng = Rng(3)
    x, gain, bias = random_array(rng, (4, 6)), random_array(rng, (6,)), random_array(rng, (6,))
    out = T.layer_norm(x, gain, bias).data
    for i in range(4):
        mu = sum(x[i]) / 6
        var = sum((v - mu) ** 2 for v in x[i]) / 6
        for j in range(6):
            expected = (x[i, j] - mu) / math.sqrt(var + T.LAYER_NORM_EPS) * gain[j] + bias[j]
            assert out[i, j] == pytest.approx(expected, abs=1e-10)


@pytest.mark.oracle
def test_gelu_matches_tanh_form():
    x = np.linspace(-2.0, 2.0, 9)
    expected = [0.5 * v * (1 + math.tanh(math.sqrt(2 / math.pi) * (v + 0.044715 * v ** 3))) for v in x]
    assert np.allclose(T.gelu(x).data, expected, atol=1e-12)


@pytest.mark.unit
def test_l2_normalize_zero_rows_stay_zero_and_are_counted():
    counter = NormCounter()
    out = T.l2_normalize(np.array([[3.0, 4.0], [0.0, 0.0]]), counter).data
    assert np.allclose(out, [[0.6, 0.8], [0.0, 0.0]])
    assert counter.zero_rows == 1


@pytest.mark.oracle
def test_attention_matches_per_head_loop():
    rng = Rng(4)
    attn = MultiHeadAttention(8, 2, rng)
    x = random_array(rng, (6, 8))
    out = attn(x).data

    def affine(layer, v):
        return v @ layer.weight.data + layer.bias.data

    q, k, v = affine(attn.wq, x), affine(attn.wk, x), affine(attn.wv, x)
    heads = []
    for h in range(2):
        cols = slice(4 * h, 4 * h + 4)
        scores = np.array([[q[i, cols] @ k[j, cols] / 2.0 for j in range(6)] for i in range(6)])
        weights = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        heads.append(weights @ v[:, cols])
    expected = affine(attn.wo, np.concatenate(heads, axis=1))
    assert np.allclose(out, expected, atol=1e-10, rtol=0)


@pytest.mark.unit
def test_attention_weights_are_row_stochastic():
    rng = Rng(6)
    attn = MultiHeadAttention(8, 4, rng)
    _, weights = multi_head_attention(random_array(rng, (2, 5, 8)), attn, 4, return_weights=True)
    assert weights.shape == (2, 4, 5, 5)
    assert np.allclose(weights.sum(axis=-1), 1.0)


@pytest.mark.unit
def test_heads_must_divide_width():
    with pytest.raises(ConfigurationError):
        MultiHeadAttention(10, 3, Rng(0))


@pytest.mark.unit
def test_batched_ops_equal_per_item_ops():
    rng = Rng(8)
    block = TransformerBlock(8, 2, rng)
    x = random_array(rng, (3, 5, 8))
    batched = block(x).data
    for b in range(3):
        assert np.allclose(batched[b], block(x[b]).data, atol=1e-12)


# Backward

@pytest.mark.unit
def test_backward_of_square():
    x = Param(np.array([3.0]), name='x')
    T.mean(T.mul(x, x)).backward()
    assert x.grad.tolist() == [6.0]


@pytest.mark.unit
def test_backward_needs_scalar():
    x = Param(np.ones((2, 2)))
    with pytest.raises(ShapeError):
        T.mul(x, 2.0).backward()


@pytest.mark.unit
def test_gradients_accumulate_until_zeroed():
    x = Param(np.array([1.0, 2.0]))
    T.sum_(x).backward()
    T.sum_(x).backward()
    assert x.grad.tolist() == [2.0, 2.0]
    x.zero_grad()
    assert x.grad.tolist() == [0.0, 0.0]


@pytest.mark.unit
def test_frozen_params_get_no_gradient():
    x = Param(np.array([1.0, 2.0]))
    x.set_trainable(False)
    y = Param(np.array([1.0]))
    T.sum_(T.add(T.mul(x, 3.0), y)).backward()
    assert x.grad.tolist() == [0.0, 0.0]
    assert y.grad.tolist() == [2.0]


def _op_cases():
    """(name, build(rng) -> (loss_fn, params)) for every differentiable primitive."""

    def unary(op, shape=(3, 4)):
        def build(rng):
            x = Param(random_array(rng, shape), name='x')
            c = random_array(rng, op(x).shape)
            return (lambda: T.sum_(T.mul(op(x), c))), [x]
        return build

    def binary(op, shape_a, shape_b):
        def build(rng):
            a = Param(random_array(rng, shape_a), name='a')
            b = Param(random_array(rng, shape_b), name='b')
            sample = op(a, b)
            c = random_array(rng, sample.shape)
            return (lambda: T.sum_(T.mul(op(a, b), c))), [a, b]
        return build

    def layer_norm(rng):
        x = Param(random_array(rng, (3, 5)), name='x')
        gain = Param(random_array(rng, (5,)), name='gain')
        bias = Param(random_array(rng, (5,)), name='bias')
        c = random_array(rng, (3, 5))
        return (lambda: T.sum_(T.mul(T.layer_norm(x, gain, bias), c))), [x, gain, bias]

    def take(rng):
        table = Param(random_array(rng, (6, 3)), name='table')
        ids = np.array([[0, 2, 2], [5, 1, 0]])
        c = random_array(rng, (2, 3, 3))
        return (lambda: T.sum_(T.mul(T.take(table, ids), c))), [table]

    def gather(rng):
        x = Param(random_array(rng, (2, 5, 3)), name='x')
        idx = np.array([[4, 0], [1, 1]])
        c = random_array(rng, (2, 2, 3))
        return (lambda: T.sum_(T.mul(T.gather_rows(x, idx), c))), [x]

    return [
        ('add_broadcast', binary(T.add, (2, 3, 4), (4,))),
        ('sub', binary(T.sub, (3, 4), (3, 4))),
        ('mul_broadcast', binary(T.mul, (2, 3, 4), (1, 4))),
        ('matmul_batched', binary(T.matmul, (2, 3, 4), (4, 5))),
        ('neg', unary(T.neg)),
        ('gelu', unary(T.gelu)),
        ('transpose', unary(T.transpose)),
        ('reshape', unary(lambda x: T.reshape(x, (4, 3)))),
        ('row_softmax', unary(T.row_softmax)),
        ('l2_normalize', unary(T.l2_normalize)),
        ('mean_axis', unary(lambda x: T.mean(x, axis=-2, keepdims=True), (3, 4))),
        ('sum_axis', unary(lambda x: T.sum_(x, axis=-1), (3, 4))),
        ('slice', unary(lambda x: T.slice_axis(x, 1, 3, axis=-2), (4, 3))),
        ('concat', binary(lambda a, b: T.concat([a, b], axis=-2), (2, 3), (4, 3))),
        ('layer_norm', layer_norm),
        ('take', take),
        ('gather_rows', gather),
    ]


@pytest.mark.oracle
@pytest.mark.parametrize('name,build', _op_cases(), ids=[case[0] for case in _op_cases()])
def test_primitive_gradients_match_finite_differences(name, build):
    rng = Rng(sum(map(ord, name)))
    f, params = build(rng)
    assert grad_check(f, params, eps=1e-5) <= 1e-4


@pytest.mark.oracle
def test_attention_layer_gradients_match_finite_differences():
    rng = Rng(10)
    attn = MultiHeadAttention(8, 2, rng)
    x = random_array(rng, (4, 8))
    target = random_array(rng, (4, 8))

    def loss():
        diff = T.sub(attn(x), target)
        return T.mean(T.mul(diff, diff))

    errors = gradient_errors(loss, attn.named_parameters(), eps=1e-5)
    assert set(errors) == {f'{p}/{w}' for p in ('wq', 'wk', 'wv', 'wo') for w in ('weight', 'bias')}
    assert max(errors.values()) <= 1e-4


@pytest.mark.unit
def test_gradcheck_flags_a_wrong_gradient():
    x = Param(np.array([1.0, -2.0]), name='x')

    def wrong_square(v):
        # forward v^2, backward claims 3v
        return T._make(v.data ** 2, (v,), lambda g: (3.0 * g * v.data,))

    assert grad_check(lambda: T.sum_(wrong_square(x)), [x]) > 0.1


@pytest.mark.unit
def test_relative_error_uses_floor_for_tiny_values():
    assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


# Modules

@pytest.mark.unit
def test_parameter_names_are_deterministic():
    block = TransformerBlock(8, 2, Rng(0))
    names = [name for name, _ in block.named_parameters()]
    assert names[0] == 'ln1/gain'
    assert 'attn/wq/weight' in names
    assert names == [name for name, _ in TransformerBlock(8, 2, Rng(1)).named_parameters()]


@pytest.mark.unit
def test_state_dict_round_trip_and_mismatch():
    source, target = Linear(3, 2, Rng(0)), Linear(3, 2, Rng(1))
    target.load_state_dict(source.state_dict())
    assert np.array_equal(target.weight.data, source.weight.data)

    with pytest.raises(CheckpointMismatchError):
        target.load_state_dict({'weight': np.zeros((3, 2))})
    with pytest.raises(CheckpointMismatchError):
        target.load_state_dict({'weight': np.zeros((2, 3)), 'bias': np.zeros(2)})


# Optimizer

@pytest.mark.unit
def test_adam_first_step_moves_by_learning_rate():
    x = Param(np.array([1.0, -1.0]))
    opt = Adam([x], lr=0.1)
    T.sum_(T.mul(x, x)).backward()
    opt.step()
    # bias-corrected first step is lr * sign(g)
    assert np.allclose(x.data, [0.9, -0.9], atol=1e-6)


@pytest.mark.unit
def test_adam_minimizes_a_quadratic():
    x = Param(np.array([3.0, -4.0]))
    opt = Adam([x], lr=0.1)
    for _ in range(300):
        x.zero_grad()
        T.sum_(T.mul(x, x)).backward()
        opt.step()
    assert np.abs(x.data).max() < 0.05


@pytest.mark.unit
def test_warmup_cosine_schedule():
    assert warmup_steps(100, 0.05) == 5
    assert warmup_steps(0) == 0
    assert warmup_cosine_lr(0, 100, 1.0) == pytest.approx(0.2)
    assert warmup_cosine_lr(4, 100, 1.0) == pytest.approx(1.0)
    assert warmup_cosine_lr(5, 100, 1.0) == pytest.approx(1.0)
    assert warmup_cosine_lr(99, 100, 1.0) < 0.01
    rates = [warmup_cosine_lr(s, 100, 1.0) for s in range(5, 100)]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
