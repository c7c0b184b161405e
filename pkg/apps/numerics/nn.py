"""
Parameter modules.

Small building blocks on top of the tensor engine: Linear, LayerNorm, MLP,
multi-head attention and a pre-norm transformer block. Modules register
their Params and child modules in assignment order, so parameter names are
deterministic ('block0/attn/wq/weight') and a state dict can be written to
an SVT1 container and read back into an identically configured model.

Usage:
    from apps.numerics.nn import TransformerBlock
    from apps.numerics.rng import Rng

    block = TransformerBlock(width=32, heads=4, rng=Rng(0))
    y = block(x)
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from apps.core.exceptions import CheckpointMismatchError, ConfigurationError, ShapeError
from apps.numerics import tensor as T
from apps.numerics.rng import Rng
from apps.numerics.tensor import Param, Tensor

INIT_STD = 0.02
SEPARATOR = '/'


class Module:
    """Base class: tracks Params and child Modules by attribute name."""

    def __init__(self):
        object.__setattr__(self, '_params', {})
        object.__setattr__(self, '_children', {})

    def __setattr__(self, name, value):
        if isinstance(value, Param):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name: str, module: 'Module') -> 'Module':
        """Register a child under a name that need not be an identifier (e.g. 'tower.sem')."""
        self._children[name] = module
        return module

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Param]]:
        for name, param in self._params.items():
            yield prefix + name, param
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + SEPARATOR)

    def parameters(self) -> list[Param]:
        return [param for _, param in self.named_parameters()]

    def trainable_parameters(self) -> list[Param]:
        return [param for param in self.parameters() if param.trainable]

    def zero_grads(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def parameter_count(self) -> int:
        return sum(param.data.size for param in self.parameters())

    def state_dict(self, prefix: str = '') -> dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters(prefix)}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = '') -> None:
        """
        Copy values from `state` into this module's Params.

        Raises:
            CheckpointMismatchError: a name is missing or a shape differs
        """
        for name, param in self.named_parameters(prefix):
            if name not in state:
                raise CheckpointMismatchError(f'checkpoint has no record {name!r}', details={'name': name})
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise CheckpointMismatchError(
                    f'checkpoint record {name!r} has shape {values.shape}, model expects {param.shape}',
                    details={'name': name, 'stored': values.shape, 'expected': param.shape},
                )
            param.assign(values)


class ModuleList(Module):
    """Indexed container; children are named '0', '1', ..."""

    def __init__(self, modules=()):
        super().__init__()
        self._items: list[Module] = []
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        self._children[str(len(self._items))] = module
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, index):
        return self._items[index]


def normal_param(rng: Rng, shape, name: str = '', std: float = INIT_STD) -> Param:
    return Param(rng.normal(shape, std=std), name=name)


def zero_param(shape, name: str = '') -> Param:
    return Param(np.zeros(shape), name=name)


class Linear(Module):
    """y = x W + b with W of shape (d_in, d_out)."""

    def __init__(self, d_in: int, d_out: int, rng: Rng, bias: bool = True, zero: bool = False):
        super().__init__()
        self.d_in = d_in
        self.d_out = d_out
        self.weight = zero_param((d_in, d_out), 'weight') if zero else normal_param(rng, (d_in, d_out), 'weight')
        self.has_bias = bias
        if bias:
            self.bias = zero_param((d_out,), 'bias')

    def forward(self, x) -> Tensor:
        y = T.matmul(x, self.weight)
        return T.add(y, self.bias) if self.has_bias else y


class LayerNorm(Module):
    def __init__(self, width: int):
        super().__init__()
        self.gain = Param(np.ones(width), name='gain')
        self.bias = zero_param((width,), 'bias')

    def forward(self, x) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)


class MLP(Module):
    """Two affine layers with GELU in between."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int, rng: Rng, zero_output: bool = False):
        super().__init__()
        self.fc1 = Linear(d_in, d_hidden, rng)
        self.fc2 = Linear(d_hidden, d_out, rng, zero=zero_output)

    def forward(self, x) -> Tensor:
        return mlp_forward(x, self)


def mlp_forward(x, mlp: MLP) -> Tensor:
    """
    Apply a two-layer GELU MLP.

    Raises:
        ShapeError: input width does not match the first layer
    """
    x = T.as_tensor(x)
    if x.shape[-1] != mlp.fc1.d_in:
        raise ShapeError(f'mlp expects width {mlp.fc1.d_in}, got input of shape {x.shape}')
    return mlp.fc2(T.gelu(mlp.fc1(x)))


def check_heads(width: int, heads: int) -> None:
    if heads < 1 or width % heads != 0:
        raise ConfigurationError(
            f'width {width} is not divisible by heads {heads}',
            details={'width': width, 'heads': heads},
        )


class MultiHeadAttention(Module):
    """Bidirectional multi-head self-attention (no mask)."""

    def __init__(self, width: int, heads: int, rng: Rng):
        super().__init__()
        check_heads(width, heads)
        self.width = width
        self.heads = heads
        self.wq = Linear(width, width, rng)
        self.wk = Linear(width, width, rng)
        self.wv = Linear(width, width, rng)
        self.wo = Linear(width, width, rng)

    def forward(self, x, return_weights: bool = False):
        return multi_head_attention(x, self, self.heads, return_weights=return_weights)


def multi_head_attention(x, params: MultiHeadAttention, heads: int, return_weights: bool = False):
    """
    Full self-attention over the row axis.

    Args:
        x: (..., s, d) tokens
        params: projections wq, wk, wv, wo
        heads: number of heads; d must be divisible by it
        return_weights: also return the per-head attention weights (..., heads, s, s)

    Returns:
        (..., s, d) tensor, or (tensor, weights ndarray) when return_weights
    """
    x = T.as_tensor(x)
    width = x.shape[-1]
    check_heads(width, heads)
    head_dim = width // heads
    scale = 1.0 / math.sqrt(head_dim)
    q, k, v = params.wq(x), params.wk(x), params.wv(x)
    outputs, weights = [], []
    for h in range(heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh = T.slice_axis(q, lo, hi, axis=-1)
        kh = T.slice_axis(k, lo, hi, axis=-1)
        vh = T.slice_axis(v, lo, hi, axis=-1)
        probs = T.row_softmax(T.mul(T.matmul(qh, T.transpose(kh)), scale))
        weights.append(probs.data)
        outputs.append(T.matmul(probs, vh))
    out = params.wo(T.concat(outputs, axis=-1))
    if return_weights:
        return out, np.stack(weights, axis=-3)
    return out


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x)); MLP ratio 4."""

    def __init__(self, width: int, heads: int, rng: Rng, mlp_ratio: int = 4):
        super().__init__()
        self.ln1 = LayerNorm(width)
        self.attn = MultiHeadAttention(width, heads, rng)
        self.ln2 = LayerNorm(width)
        self.mlp = MLP(width, mlp_ratio * width, width, rng)

    def forward(self, x) -> Tensor:
        x = T.add(x, self.attn(self.ln1(x)))
        return T.add(x, self.mlp(self.ln2(x)))


class Embedding(Module):
    """Lookup table of shape (count, width)."""

    def __init__(self, count: int, width: int, rng: Rng):
        super().__init__()
        self.count = count
        self.table = normal_param(rng, (count, width), 'table')

    def forward(self, ids) -> Tensor:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.count):
            raise ShapeError(
                f'lookup id out of range: table has {self.count} rows, got ids in '
                f'[{int(ids.min())}, {int(ids.max())}]'
            )
        return T.take(self.table, ids)
