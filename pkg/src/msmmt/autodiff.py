"""Dense-tensor math with reverse-mode differentiation.

A small define-by-run autodiff engine over numpy arrays. Every operation
builds a fresh graph node; calling :func:`backward` on a scalar result
accumulates gradients into ``.grad`` of every tensor on the path that has
``requires_grad`` set. Gradients accumulate across repeated backward calls
until cleared (documented accumulate mode); optimizers are expected to
zero them between steps.

Compute precision is single by default. Double precision is supported by
constructing tensors with ``dtype=np.float64`` and is intended for
finite-difference gradient checking, where float32 has too little headroom.

Any operation that produces a non-finite value raises :class:`NumericError`
carrying the operation name instead of silently propagating NaN/Inf.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "NumericError",
    "ShapeError",
    "concat",
    "softmax",
    "layernorm",
    "dropout",
]

_DEFAULT_DTYPE = np.float32

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class NumericError(ValueError):
    """A tensor operation produced NaN/Inf (message names the op)."""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by op '{op}'")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcastable(sa: tuple, sb: tuple) -> bool:
    # numpy semantics: trailing dimensions must match or be 1
    for a, b in zip(reversed(sa), reversed(sb)):
        if a != b and a != 1 and b != 1:
            return False
    return True


class Tensor:
    """Dense float array with optional reverse-mode gradient tracking.

    Parameters
    ----------
    data : array_like
        Values; converted to float32 unless already a float64 array or an
        explicit ``dtype`` is given.
    requires_grad : bool
        Mark this tensor as a differentiable leaf.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype != np.float64:
            arr = arr.astype(_DEFAULT_DTYPE, copy=False)
        _check_finite(arr, "tensor")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward_fn = None
        self._op = "leaf"

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple, backward_fn, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward_fn = backward_fn
            out._op = op
        else:
            out._parents = ()
            out._backward_fn = None
            out._op = op
        return out

    @staticmethod
    def _wrap(other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other))

    # -- basic introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple:
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

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward_fn = None
        out._op = "detach"
        return out

    # -- elementwise arithmetic --------------------------------------------------

    def _elementwise_check(self, other: "Tensor", op: str) -> None:
        if not _broadcastable(self.data.shape, other.data.shape):
            raise ShapeError(
                f"op '{op}': shapes {self.data.shape} and {other.data.shape} "
                "are not broadcast-compatible"
            )

    def __add__(self, other):
        other = self._wrap(other)
        self._elementwise_check(other, "add")
        out_data = self.data + other.data

        def bwd(g):
            return _unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)

        return Tensor._from_op(out_data, (self, other), bwd, "add")

    def __radd__(self, other):
        return self._wrap(other).__add__(self)

    def __sub__(self, other):
        other = self._wrap(other)
        self._elementwise_check(other, "sub")
        out_data = self.data - other.data

        def bwd(g):
            return _unbroadcast(g, self.data.shape), _unbroadcast(-g, other.data.shape)

        return Tensor._from_op(out_data, (self, other), bwd, "sub")

    def __rsub__(self, other):
        return self._wrap(other).__sub__(self)

    def __neg__(self):
        def bwd(g):
            return (-g,)

        return Tensor._from_op(-self.data, (self,), bwd, "neg")

    def __mul__(self, other):
        other = self._wrap(other)
        self._elementwise_check(other, "mul")
        out_data = self.data * other.data
        a_data, b_data = self.data, other.data

        def bwd(g):
            return (
                _unbroadcast(g * b_data, a_data.shape),
                _unbroadcast(g * a_data, b_data.shape),
            )

        return Tensor._from_op(out_data, (self, other), bwd, "mul")

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        other = self._wrap(other)
        self._elementwise_check(other, "div")
        if np.any(other.data == 0):
            raise ZeroDivisionError("op 'div': division by zero")
        out_data = self.data / other.data
        a_data, b_data = self.data, other.data

        def bwd(g):
            return (
                _unbroadcast(g / b_data, a_data.shape),
                _unbroadcast(-g * a_data / (b_data * b_data), b_data.shape),
            )

        return Tensor._from_op(out_data, (self, other), bwd, "div")

    def __rtruediv__(self, other):
        return self._wrap(other).__truediv__(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("pow exponent must be a python scalar")
        with np.errstate(over="ignore", invalid="ignore"):
            out_data = self.data**exponent
        x = self.data

        def bwd(g):
            return (g * exponent * x ** (exponent - 1),)

        return Tensor._from_op(out_data, (self,), bwd, "pow")

    # -- elementwise functions ---------------------------------------------------

    def exp(self):
        with np.errstate(over="ignore"):
            out_data = np.exp(self.data)

        def bwd(g):
            return (g * out_data,)

        return Tensor._from_op(out_data, (self,), bwd, "exp")

    def log(self):
        if np.any(self.data <= 0):
            raise ValueError("op 'log': input must be strictly positive")
        x = self.data

        def bwd(g):
            return (g / x,)

        return Tensor._from_op(np.log(x), (self,), bwd, "log")

    def sqrt(self):
        if np.any(self.data < 0):
            raise ValueError("op 'sqrt': input must be non-negative")
        out_data = np.sqrt(self.data)

        def bwd(g):
            return (g / (2.0 * out_data),)

        return Tensor._from_op(out_data, (self,), bwd, "sqrt")

    def tanh(self):
        out_data = np.tanh(self.data)

        def bwd(g):
            return (g * (1.0 - out_data * out_data),)

        return Tensor._from_op(out_data, (self,), bwd, "tanh")

    def relu(self):
        x = self.data
        out_data = np.maximum(x, 0)

        def bwd(g):
            return (g * (x > 0),)

        return Tensor._from_op(out_data, (self,), bwd, "relu")

    def gelu(self):
        # tanh approximation: 0.5 x (1 + tanh(c (x + a x^3)))
        x = self.data
        inner = _GELU_C * (x + _GELU_A * x**3)
        t = np.tanh(inner)
        out_data = 0.5 * x * (1.0 + t)

        def bwd(g):
            sech2 = 1.0 - t * t
            d = 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            return (g * d,)

        return Tensor._from_op(out_data, (self,), bwd, "gelu")

    # -- linear algebra -----------------------------------------------------------

    def matmul(self, other):
        other = self._wrap(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError("matmul operands must be at least 2-D")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(
                f"matmul inner dimensions differ: {a.shape} vs {b.shape}"
            )
        if not _broadcastable(a.shape[:-2], b.shape[:-2]):
            raise ShapeError(
                f"matmul leading dimensions do not match: {a.shape} vs {b.shape}"
            )
        out_data = np.matmul(a, b)

        def _reduce(grad, shape):
            extra = grad.ndim - len(shape)
            if extra:
                grad = grad.sum(axis=tuple(range(extra)))
            axes = tuple(
                i for i in range(len(shape) - 2)
                if shape[i] == 1 and grad.shape[i] != 1
            )
            if axes:
                grad = grad.sum(axis=axes, keepdims=True)
            return grad

        def bwd(g):
            return (
                _reduce(np.matmul(g, np.swapaxes(b, -1, -2)), a.shape),
                _reduce(np.matmul(np.swapaxes(a, -1, -2), g), b.shape),
            )

        return Tensor._from_op(out_data, (self, other), bwd, "matmul")

    def __matmul__(self, other):
        return self.matmul(other)

    # -- reductions ----------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        in_shape = self.data.shape

        def bwd(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, in_shape).copy(),)

        return Tensor._from_op(np.asarray(out_data), (self, ), bwd, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis=None, keepdims: bool = False):
        out_data = self.data.max(axis=axis, keepdims=keepdims)
        x = self.data

        def bwd(g):
            g = np.asarray(g)
            full = out_data
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
                full = np.expand_dims(out_data, axis)
            mask = (x == full).astype(x.dtype)
            counts = mask.sum(axis=axis, keepdims=True) if axis is not None else mask.sum()
            return (mask * g / counts,)

        return Tensor._from_op(np.asarray(out_data), (self,), bwd, "max")

    # -- shape manipulation -----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        in_shape = self.data.shape
        out_data = self.data.reshape(shape)

        def bwd(g):
            return (g.reshape(in_shape),)

        return Tensor._from_op(out_data, (self,), bwd, "reshape")

    def transpose(self, axes):
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        out_data = self.data.transpose(axes)

        def bwd(g):
            return (g.transpose(inv),)

        return Tensor._from_op(out_data, (self,), bwd, "transpose")

    def __getitem__(self, idx):
        out_data = self.data[idx]
        in_shape = self.data.shape
        dtype = self.data.dtype
        advanced = isinstance(idx, np.ndarray) or (
            isinstance(idx, tuple) and any(isinstance(i, np.ndarray) for i in idx)
        )

        def bwd(g):
            full = np.zeros(in_shape, dtype=dtype)
            if advanced:
                np.add.at(full, idx, g)  # integer indices may repeat
            else:
                full[idx] = g
            return (full,)

        return Tensor._from_op(np.ascontiguousarray(out_data), (self,), bwd, "slice")

    # -- backward pass -------------------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode accumulation from a scalar result into leaf ``.grad``s."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        if not self.requires_grad:
            raise ValueError("backward() on a graph with no differentiable leaves")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                # differentiable leaf: accumulate
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
                continue
            parent_grads = node._backward_fn(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


# -- free functions ------------------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an axis with gradient routing back to the parts."""
    tensors = [Tensor._wrap(t) for t in tensors]
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return Tensor._from_op(out_data, tuple(tensors), bwd, "concat")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis``; rows sum to 1."""
    if x.data.shape[axis] == 0:
        raise ShapeError("softmax over an empty axis")
    shift = Tensor(x.data.max(axis=axis, keepdims=True))  # constant: softmax is shift-invariant
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    if x.data.shape[-1] == 0:
        raise ShapeError("layernorm over a zero-length last axis")
    if eps <= 0:
        raise ValueError("layernorm eps must be positive")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    y = xc / (var + eps).sqrt()
    return y * gamma + beta


def dropout(x: Tensor, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity when ``train`` is False or rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not train or rate == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return x * Tensor(mask)
