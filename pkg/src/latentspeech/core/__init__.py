"""Minimal differentiable tensor engine."""

from .functional import conv1d, conv_transpose1d, linear
from .gradcheck import grad_check
from .nn import (
    Conv1d,
    ConvTranspose1d,
    Embedding,
    FFTBlock,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    multi_head_attention,
)
from .optim import ParamStore, adam_step
from .tensor import (
    Tensor,
    concat,
    default_dtype,
    exp,
    leaky_relu,
    log,
    no_grad,
    pad,
    relu,
    sigmoid,
    softmax,
    sqrt,
    stack,
    tabs,
    tanh,
)

__all__ = [
    "Tensor", "Module", "ParamStore", "adam_step", "grad_check",
    "conv1d", "conv_transpose1d", "linear", "multi_head_attention",
    "Conv1d", "ConvTranspose1d", "Embedding", "FFTBlock", "LayerNorm", "Linear",
    "MultiHeadAttention", "concat", "default_dtype", "exp", "leaky_relu", "log",
    "no_grad", "pad", "relu", "sigmoid", "softmax", "sqrt", "stack", "tabs", "tanh",
]
