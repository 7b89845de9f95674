"""Parameterized layers and the parameter store they register into."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..errors import ConfigError, DimensionError
from . import functional as F
from .tensor import Tensor, embedding, layer_norm, relu


class Module:
    """Base class: any ``Tensor`` attribute with ``requires_grad`` is a parameter.

    Sub-modules may be stored directly or inside lists; parameter paths are
    the dot-joined attribute names (list entries use their index).
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return dict(self.named_parameters(prefix))

    def load_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> None:
        """Copy arrays into parameters; every parameter must be present."""
        for name, param in self.named_parameters(prefix):
            if name not in arrays:
                raise KeyError(f"missing parameter {name!r}")
            value = np.asarray(arrays[name], dtype=param.data.dtype)
            if value.shape != param.shape:
                raise DimensionError(f"{name}: expected shape {param.shape}, got {value.shape}")
            param.data = value.copy()

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Linear(Module):
    def __init__(
        self, d_in: int, d_out: int, rng: np.random.Generator, zero_init: bool = False, bias: bool = True
    ):
        if zero_init:
            self.weight, self.bias = _zeros((d_out, d_in)), _zeros((d_out,))
        else:
            self.weight = _uniform(rng, (d_out, d_in), d_in)
            self.bias = _uniform(rng, (d_out,), d_in)
        if not bias:
            self.bias = None

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 1,
        dilation: int = 1,
        padding: int | str = "same",
        zero_init: bool = False,
    ):
        self.stride, self.dilation, self.padding = stride, dilation, padding
        if zero_init:
            self.weight, self.bias = _zeros((c_out, c_in, kernel)), _zeros((c_out,))
        else:
            fan_in = c_in * kernel
            self.weight = _uniform(rng, (c_out, c_in, kernel), fan_in)
            self.bias = _uniform(rng, (c_out,), fan_in)

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, self.stride, self.dilation, self.padding)


class ConvTranspose1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, stride: int = 1, padding: int = 0):
        self.stride, self.padding = stride, padding
        fan_in = c_in * kernel // stride
        self.weight = _uniform(rng, (c_in, c_out, kernel), fan_in)
        self.bias = _uniform(rng, (c_out,), fan_in)

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv_transpose1d(x, self.weight, self.bias, self.stride, self.padding)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = _zeros((dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


class Embedding(Module):
    def __init__(self, vocab: int, dim: int, rng: np.random.Generator):
        self.vocab = vocab
        self.weight = Tensor(rng.normal(0.0, 1.0, size=(vocab, dim)), requires_grad=True)

    def __call__(self, ids) -> Tensor:
        return embedding(self.weight, ids)


class MultiHeadAttention(Module):
    """Self-attention over a ``[L, D]`` sequence.

    The softmax weights of the latest call are kept in ``last_weights``
    (``[heads, L, L]``) for inspection.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if heads < 1 or dim % heads:
            raise ConfigError(f"model width {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        # a key bias shifts every score in a row equally, so softmax ignores it
        self.k = Linear(dim, dim, rng, bias=False)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self.last_weights: np.ndarray | None = None

    def __call__(self, x: Tensor) -> Tensor:
        q = F.split_heads(self.q(x), self.heads)
        k = F.split_heads(self.k(x), self.heads)
        v = F.split_heads(self.v(x), self.heads)
        attended, weights = F.scaled_dot_attention(q, k, v)
        self.last_weights = weights.data
        return self.out(F.merge_heads(attended))


def multi_head_attention(x: Tensor, heads: int, rng: np.random.Generator | None = None) -> Tensor:
    """One-off attention with freshly initialized projections."""
    attn = MultiHeadAttention(x.shape[-1], heads, rng or np.random.default_rng(0))
    return attn(x)


class FFTBlock(Module):
    """Feed-forward transformer block: self-attention then a conv feed-forward.

    Both sub-layers are residual and followed by layer norm.  Input and
    output are ``[L, D]``.
    """

    def __init__(self, dim: int, heads: int, hidden: int, kernel: int, rng: np.random.Generator):
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.ff1 = Conv1d(dim, hidden, kernel, rng)
        self.ff2 = Conv1d(hidden, dim, 1, rng)
        self.norm2 = LayerNorm(dim)

    def __call__(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attn(x))
        h = self.ff2(relu(self.ff1(x.T))).T
        return self.norm2(x + h)
