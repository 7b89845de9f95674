"""Parameter store with Adam moment buffers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor


@dataclass
class ParamStore:
    params: dict[str, Tensor]
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.params.items():
            self.m.setdefault(name, np.zeros_like(p.data))
            self.v.setdefault(name, np.zeros_like(p.data))

    @classmethod
    def from_modules(cls, **modules) -> "ParamStore":
        """Collect parameters from modules, prefixing paths with the keyword names."""
        params: dict[str, Tensor] = {}
        for prefix, module in modules.items():
            for name, p in module.named_parameters(prefix.replace("__", ".") + "."):
                if name in params:
                    raise ConfigError(f"duplicate parameter path {name!r}")
                params[name] = p
        return cls(params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Current gradients; parameters the loss did not reach get zeros."""
        return {
            name: p.grad if p.grad is not None else np.zeros_like(p.data)
            for name, p in self.params.items()
        }

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}


def adam_step(
    store: ParamStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    lr_scale: Mapping[str, float] | None = None,
) -> ParamStore:
    """Bias-corrected Adam update applied in place; returns ``store``.

    ``lr_scale`` maps parameter-path prefixes to learning-rate multipliers.
    """
    missing = [name for name in store.params if name not in grads]
    if missing:
        raise KeyError(f"no gradient for parameters: {missing[:5]}")
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = np.asarray(grads[name], dtype=p.data.dtype)
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        step = lr * _scale_for(name, lr_scale)
        if step:
            p.data = p.data - (step * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
    return store


def _scale_for(name: str, lr_scale: Mapping[str, float] | None) -> float:
    if not lr_scale:
        return 1.0
    for prefix, scale in lr_scale.items():
        if name.startswith(prefix):
            return scale
    return 1.0
