"""Finite-difference validation of analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import NumericError
from .tensor import Tensor, default_dtype


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-6,
    max_elements: int = 32,
    seed: int = 0,
) -> float:
    """Largest relative gradient error over ``params``.

    ``f`` is a closure returning a scalar Tensor computed from ``params``.
    Both passes run in float64.  For each parameter tensor up to
    ``max_elements`` entries are perturbed with central differences, and the
    error is ``|a - n| / max(|a|, |n|, 1e-8)`` with the norms taken over the
    checked entries.  The small default step keeps ReLU kinks out of the
    difference stencil.
    """
    rng = np.random.default_rng(seed)
    saved = {name: p.data for name, p in params.items()}
    try:
        with default_dtype(np.float64):
            for p in params.values():
                p.data = p.data.astype(np.float64)
                p.grad = None

            def evaluate() -> float:
                value = f()
                if not np.isfinite(value.data).all():
                    raise NumericError("objective is not finite")
                return float(value.data)

            out = f()
            out.backward()
            worst = 0.0
            for name, p in params.items():
                analytic_full = p.grad if p.grad is not None else np.zeros_like(p.data)
                flat = p.data.reshape(-1)
                n = flat.size
                picks = np.arange(n) if n <= max_elements else rng.choice(n, max_elements, replace=False)
                analytic = analytic_full.reshape(-1)[picks]
                numeric = np.empty(len(picks))
                for j, i in enumerate(picks):
                    orig = flat[i]
                    flat[i] = orig + eps
                    hi = evaluate()
                    flat[i] = orig - eps
                    lo = evaluate()
                    flat[i] = orig
                    numeric[j] = (hi - lo) / (2 * eps)
                diff = np.linalg.norm(analytic - numeric)
                scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
                worst = max(worst, diff / scale)
    finally:
        for name, p in params.items():
            p.data = saved[name]
            p.grad = None
    return worst
