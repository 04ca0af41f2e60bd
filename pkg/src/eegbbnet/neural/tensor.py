"""Dense tensors with reverse-mode differentiation.

Just enough of an array-autograd core for the model in this package:
elementwise arithmetic, broadcast-aware matmul, reductions and ReLU.
Fused layer primitives (convolution, pooling, batch norm, the loss) live
in :mod:`eegbbnet.neural.layers` and register their own gradient
closures through :func:`from_op`.

The graph is recorded eagerly on every op whose inputs require
gradients, and freed as soon as :meth:`Tensor.backward` has run.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (cheap eval-mode forwards)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None

    # -- introspection ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -- graph ------------------------------------------------------------

    def backward(self):
        """Reverse-mode pass from a scalar; frees the recorded graph."""
        if self.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad_out = grads.pop(id(node), None)
            if grad_out is None:
                continue
            if node._grad_fn is not None:
                parent_grads = node._grad_fn(grad_out)
                for parent, g in zip(node._parents, parent_grads):
                    if g is None or not parent.requires_grad:
                        continue
                    key = id(parent)
                    if parent._grad_fn is None:
                        # leaf: accumulate into .grad
                        if parent.grad is None:
                            parent.grad = g.copy() if g.base is not None else g
                        else:
                            parent.grad = parent.grad + g
                    elif key in grads:
                        grads[key] = grads[key] + g
                    else:
                        grads[key] = g
            elif node is self and self._parents == ():
                # scalar leaf: backward on itself
                if self.requires_grad:
                    self.grad = grad_out
        for node in order:
            node._parents = ()
            node._grad_fn = None

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)


def _toposort(root: Tensor) -> list[Tensor]:
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
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def from_op(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    """Wrap an op result, recording the graph only when it can matter."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- primitive ops ---------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data + b.data

    def grad_fn(g):
        return unbroadcast(g, a.data.shape), unbroadcast(g, b.data.shape)

    return from_op(out, (a, b), grad_fn)


def sub(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data - b.data

    def grad_fn(g):
        return unbroadcast(g, a.data.shape), unbroadcast(-g, b.data.shape)

    return from_op(out, (a, b), grad_fn)


def mul(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data * b.data

    def grad_fn(g):
        return unbroadcast(g * b.data, a.data.shape), unbroadcast(g * a.data, b.data.shape)

    return from_op(out, (a, b), grad_fn)


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data**exponent

    def grad_fn(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return from_op(out, (a,), grad_fn)


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)

    def grad_fn(g):
        return (g * (0.5 / root),)

    return from_op(root, (a,), grad_fn)


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy's batch broadcasting; operands must be >= 2-D."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def grad_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = unbroadcast(np.matmul(g, _swap_last(b.data)), a.data.shape)
        if b.requires_grad:
            gb = unbroadcast(np.matmul(_swap_last(a.data), g), b.data.shape)
        return ga, gb

    return from_op(out, (a, b), grad_fn)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, a.data.dtype.type(0))

    def grad_fn(g):
        return (g * (out > 0),)

    return from_op(out, (a,), grad_fn)


def reshape(a: Tensor, shape) -> Tensor:
    original = a.data.shape
    out = a.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(original),)

    return from_op(out, (a,), grad_fn)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False),)

    return from_op(out, (a,), grad_fn)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)]
    )

    def grad_fn(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        scaled = g / a.data.dtype.type(count)
        return (np.broadcast_to(scaled, a.data.shape).astype(a.data.dtype, copy=False),)

    return from_op(out, (a,), grad_fn)
