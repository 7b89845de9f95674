"""Convolution and attention primitives built on :mod:`latentspeech.core.tensor`."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor, matmul, softmax, transpose, reshape


def _window_index(k: int, l_out: int, stride: int, dilation: int) -> np.ndarray:
    return np.arange(k)[:, None] * dilation + np.arange(l_out)[None, :] * stride


def _col2im(cols: np.ndarray, length: int, stride: int, dilation: int) -> np.ndarray:
    """Adjoint of gathering windows: cols [B, C, K, L_out] -> [B, C, length]."""
    b, c, k, l_out = cols.shape
    out = np.zeros((b, c, length), dtype=cols.dtype)
    span = stride * (l_out - 1) + 1
    for j in range(k):
        out[:, :, j * dilation : j * dilation + span : stride] += cols[:, :, j, :]
    return out


def _batched_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_b a[b] @ b[b].T`` as one matrix product."""
    if a.shape[0] == 1:
        return a[0] @ b[0].T
    fold = lambda m: np.swapaxes(m, 0, 1).reshape(m.shape[1], -1)
    return fold(a) @ fold(b).T


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
    padding: int | str = "same",
) -> Tensor:
    """1-D cross-correlation over ``[C_in, L]`` or ``[B, C_in, L]`` input.

    ``padding="same"`` pads ``dilation*(K-1)/2`` zeros on each side and needs
    odd ``K``; with ``stride=1`` the output length equals the input length.
    """
    x = as_tensor(x)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    c_out, c_in, k = weight.shape
    if xd.ndim != 3 or xd.shape[1] != c_in:
        raise DimensionError(f"conv1d expects {c_in} input channels, got shape {x.shape}")
    if dilation < 1 or stride < 1:
        raise ConfigError("stride and dilation must be >= 1")
    if padding == "same":
        if k % 2 == 0:
            raise ConfigError(f"same-padding needs an odd kernel, got K={k}")
        padding = dilation * (k - 1) // 2
    bsz, _, length = xd.shape
    padded_len = length + 2 * padding
    l_out = (padded_len - dilation * (k - 1) - 1) // stride + 1
    if l_out < 1:
        raise DimensionError(f"kernel span {(k - 1) * dilation + 1} exceeds padded length {padded_len}")

    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding))) if padding else xd
    idx = _window_index(k, l_out, stride, dilation)
    cols = xp[:, :, idx].reshape(bsz, c_in * k, l_out)
    w2 = weight.data.reshape(c_out, c_in * k)
    out = w2 @ cols
    if bias is not None:
        out = out + bias.data[:, None]
    if squeeze:
        out = out[0]

    def backward(g):
        g3 = g[None] if squeeze else g
        gx = gw = gb = None
        if x.requires_grad:
            gcols = (w2.T @ g3).reshape(bsz, c_in, k, l_out)
            gxp = _col2im(gcols, padded_len, stride, dilation)
            gx = gxp[:, :, padding : padding + length]
            if squeeze:
                gx = gx[0]
        if weight.requires_grad:
            gw = _batched_outer(g3, cols).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g3.sum(axis=(0, 2))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv1d")


def conv_transpose1d(
    x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Transposed convolution; ``weight`` is ``[C_in, C_out, K]``.

    Output length is ``(L - 1) * stride - 2 * padding + K``.
    """
    x = as_tensor(x)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    c_in, c_out, k = weight.shape
    if xd.ndim != 3 or xd.shape[1] != c_in:
        raise DimensionError(f"conv_transpose1d expects {c_in} input channels, got shape {x.shape}")
    bsz, _, length = xd.shape
    full_len = (length - 1) * stride + k
    out_len = full_len - 2 * padding
    if out_len < 1:
        raise DimensionError("transposed convolution output would be empty")
    w2 = weight.data.reshape(c_in, c_out * k)
    cols = (w2.T @ xd).reshape(bsz, c_out, k, length)
    full = _col2im(cols, full_len, stride, 1)
    out = full[:, :, padding : padding + out_len]
    if bias is not None:
        out = out + bias.data[:, None]
    if squeeze:
        out = out[0]
    idx = _window_index(k, length, stride, 1)

    def backward(g):
        g3 = g[None] if squeeze else g
        gfull = np.pad(g3, ((0, 0), (0, 0), (padding, padding)))
        gcols = gfull[:, :, idx].reshape(bsz, c_out * k, length)
        gx = gw = gb = None
        if x.requires_grad:
            gx = w2 @ gcols
            if squeeze:
                gx = gx[0]
        if weight.requires_grad:
            gw = _batched_outer(xd, gcols).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g3.sum(axis=(0, 2))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv_transpose1d")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the trailing axis; ``weight`` is ``[D_out, D_in]``."""
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear expects trailing dim {weight.shape[1]}, got {x.shape}")
    out = matmul(x, transpose(weight, None))
    return out if bias is None else out + bias


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """Attention over ``[..., L, d]`` operands; returns (output, weights)."""
    d = q.shape[-1]
    scores = matmul(q, transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)))
    weights = softmax(scores * (1.0 / np.sqrt(d)), axis=-1)
    return matmul(weights, v), weights


def split_heads(x: Tensor, heads: int) -> Tensor:
    """``[L, D]`` -> ``[heads, L, D / heads]``."""
    length, d = x.shape
    if d % heads:
        raise ConfigError(f"model width {d} is not divisible by {heads} heads")
    return transpose(reshape(x, (length, heads, d // heads)), (1, 0, 2))


def merge_heads(x: Tensor) -> Tensor:
    heads, length, dh = x.shape
    return reshape(transpose(x, (1, 0, 2)), (length, heads * dh))
