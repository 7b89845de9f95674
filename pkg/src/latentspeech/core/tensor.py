"""Dense tensors with reverse-mode differentiation.

Every operation records its parents and a closure mapping the output
gradient to one gradient per parent.  ``Tensor.backward`` walks the graph
in reverse topological order.  Values are float32 unless a
``default_dtype`` context says otherwise (gradient checking runs in float64).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import DimensionError, NumericError

_state = {"dtype": np.float32, "grad": True}


@contextlib.contextmanager
def default_dtype(dtype):
    previous = _state["dtype"]
    _state["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _state["dtype"] = previous


@contextlib.contextmanager
def no_grad():
    previous = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = previous


def get_default_dtype():
    return _state["dtype"]


def _check_finite(values: np.ndarray, where: str) -> None:
    if not np.isfinite(values).all():
        raise NumericError(f"non-finite values in {where}")


class Tensor:
    """A float array plus the bookkeeping needed to differentiate through it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_state["dtype"])
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self._op = "leaf"

    # construction of graph nodes ------------------------------------------------

    @staticmethod
    def from_op(data: np.ndarray, parents: Sequence["Tensor"], backward: Callable, op: str) -> "Tensor":
        """Wrap the result of a primitive.

        ``backward(g)`` must return one gradient (or None) per parent, each
        shaped like that parent.
        """
        out = Tensor(data)
        _check_finite(out.data, op)
        out._op = op
        if _state["grad"] and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # conveniences ----------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # differentiation --------------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.size != 1:
                raise DimensionError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            _check_finite(g, f"gradient of {node._op}")
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operators ----------------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    order.reverse()
    return order


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise arithmetic -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.from_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.from_op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor.from_op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        )

    return Tensor.from_op(out, (a, b), backward, "div")


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data**exponent
    return Tensor.from_op(
        out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),), "pow"
    )


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return Tensor.from_op(out, (a,), lambda g: (0.5 * g / out,), "sqrt")


def tabs(a: Tensor) -> Tensor:
    return Tensor.from_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = out.astype(x.dtype)
    return Tensor.from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor.from_op(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)
    return Tensor.from_op(a.data * scale, (a,), lambda g: (g * scale,), "leaky_relu")


# reductions (accumulate in float64) ------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.sum(a.data, axis=axis, dtype=np.float64, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).astype(a.data.dtype),)

    return Tensor.from_op(out, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return tsum(a, axis, keepdims) * (1.0 / count)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, dtype=np.float64, keepdims=True).astype(e.dtype)

    def backward(g):
        inner = np.sum(g * out, axis=axis, dtype=np.float64, keepdims=True).astype(out.dtype)
        return (out * (g - inner),)

    return Tensor.from_op(out, (a,), backward, "softmax")


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the trailing axis, then scale and shift."""
    x = a.data
    mu = np.mean(x, axis=-1, dtype=np.float64, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, dtype=np.float64, keepdims=True)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = ((x - mu) * inv).astype(x.dtype)
    out = xhat * gamma.data + beta.data

    def backward(g):
        d = x.shape[-1]
        gx_hat = g * gamma.data
        gx = inv / d * (
            d * gx_hat
            - gx_hat.sum(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True)
        )
        return (
            gx,
            _unbroadcast(g * xhat, gamma.shape),
            _unbroadcast(g, beta.shape),
        )

    return Tensor.from_op(out, (a, gamma, beta), backward, "layer_norm")


# shape manipulation ------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    return Tensor.from_op(
        a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape"
    )


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is not None and len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    inverse = None if axes is None else tuple(np.argsort(axes))
    return Tensor.from_op(
        np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose"
    )


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def getitem(a: Tensor, index) -> Tensor:
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return Tensor.from_op(a.data[index], (a,), backward, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(
        np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat"
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def pad(a: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    """Zero padding, ``widths`` as in ``numpy.pad``."""
    widths = tuple(tuple(w) for w in widths)
    crop = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return Tensor.from_op(np.pad(a.data, widths), (a,), lambda g: (g[crop],), "pad")


# linear algebra ----------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            bt = b.data if b.ndim == 1 else np.swapaxes(b.data, -1, -2)
            ga = _unbroadcast(g[..., None] * b.data if b.ndim == 1 else g @ bt, a.shape)
        if b.requires_grad:
            if b.ndim == 1:
                gb = np.einsum("...i,...->i", a.data, g)
            else:
                at = np.swapaxes(a.data, -1, -2) if a.ndim > 1 else a.data[:, None]
                gg = g if a.ndim > 1 else g[None, :]
                gb = _unbroadcast(at @ gg, b.shape)
        return ga, gb

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]``."""
    return getitem(weight, np.asarray(ids, dtype=np.int64))


def stop_gradient(a: Tensor) -> Tensor:
    return a.detach()


def tensors_finite(values: Iterable[Tensor]) -> bool:
    return all(np.isfinite(v.data).all() for v in values)
