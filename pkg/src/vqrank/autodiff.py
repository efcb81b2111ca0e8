"""Reverse-mode automatic differentiation over dense numpy arrays.

Graphs are built eagerly (define-by-run): every op computes its value on
construction and records a closure that can recompute it from its parents,
so ``forward`` can re-evaluate a graph after leaf data has been rebound.
Binary elementwise ops broadcast like numpy; gradients are summed back to
the operand shape.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

LAYER_NORM_EPS = 1e-5


class DimensionError(ValueError):
    """Operand shapes are incompatible for a primitive."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite values are required."""


class ContractError(RuntimeError):
    """An API precondition was violated."""


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64 if dtype is None else dtype)
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the computation graph.

    Leaves are created directly; interior nodes come from the primitive
    functions below. ``grad`` is filled in by :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "parents", "_backward", "_forward")

    def __init__(self, data, requires_grad: bool = False, dtype=None, *, check_finite: bool = True):
        arr = _as_array(data, dtype)
        if check_finite and not np.all(np.isfinite(arr)):
            raise NumericError("tensor data contains NaN or Inf")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op = "leaf"
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._forward: Callable[[], np.ndarray] | None = None

    @classmethod
    def _node(cls, data, op, parents, forward, backward) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        out.op = op
        out.parents = tuple(parents)
        out._forward = forward
        out._backward = backward
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, dtype={self.dtype})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)

    @property
    def T(self):
        return transpose(self)


def _lift(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype), check_finite=False)


def _accumulate(node: Tensor, grad: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.array(grad, dtype=node.data.dtype, copy=True)
    else:
        node.grad += grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- primitives


def add(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("add", a, b)

    def fwd():
        return a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return Tensor._node(fwd(), "add", (a, b), fwd, bwd)


def sub(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("sub", a, b)

    def fwd():
        return a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return Tensor._node(fwd(), "sub", (a, b), fwd, bwd)


def mul(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _broadcast_shape("mul", a, b)

    def fwd():
        return a.data * b.data

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return Tensor._node(fwd(), "mul", (a, b), fwd, bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy batch broadcasting; both operands at least 2-D."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: incompatible batch shapes {a.shape} and {b.shape}") from None

    def fwd():
        return a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return Tensor._node(fwd(), "matmul", (a, b), fwd, bwd)


def _norm_axis(axis: int, ndim: int, op: str, shape) -> int:
    if not -ndim <= axis < ndim:
        raise DimensionError(f"{op}: axis {axis} out of range for shape {shape}")
    return axis % ndim


def sum_(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    if axis is not None:
        axis = _norm_axis(axis, x.ndim, "sum", x.shape)

    def fwd():
        return np.sum(x.data, axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return Tensor._node(fwd(), "sum", (x,), fwd, bwd)


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    if axis is not None:
        axis = _norm_axis(axis, x.ndim, "mean", x.shape)
    count = x.data.size if axis is None else x.shape[axis]
    if count == 0:
        raise DimensionError(f"mean: empty reduction over shape {x.shape}")

    def fwd():
        return np.mean(x.data, axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g / count, x.shape))

    return Tensor._node(fwd(), "mean", (x,), fwd, bwd)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise DimensionError("concat: no operands")
    ndim = tensors[0].ndim
    axis = _norm_axis(axis, ndim, "concat", tensors[0].shape)
    for t in tensors[1:]:
        same = t.ndim == ndim and all(
            t.shape[i] == tensors[0].shape[i] for i in range(ndim) if i != axis
        )
        if not same:
            raise DimensionError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def fwd():
        return np.concatenate([t.data for t in tensors], axis=axis)

    def bwd(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * ndim
                idx[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(idx)])

    return Tensor._node(fwd(), "concat", tensors, fwd, bwd)


def slice_(x: Tensor, index) -> Tensor:
    """Basic (non-fancy) indexing: ints, slices, Ellipsis, None."""
    try:
        probe = x.data[index]
    except IndexError as exc:
        raise DimensionError(f"slice: index {index!r} invalid for shape {x.shape}") from exc

    def fwd():
        return x.data[index]

    def bwd(g):
        full = np.zeros_like(x.data)
        full[index] += g
        _accumulate(x, full)

    return Tensor._node(np.array(probe, copy=True), "slice", (x,), fwd, bwd)


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        if x.ndim < 2:
            raise DimensionError(f"transpose: need at least 2 dims, got shape {x.shape}")
        axes = list(range(x.ndim - 2)) + [x.ndim - 1, x.ndim - 2]
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inverse = tuple(np.argsort(axes))

    def fwd():
        return np.transpose(x.data, axes)

    def bwd(g):
        _accumulate(x, np.transpose(g, inverse))

    return Tensor._node(fwd(), "transpose", (x,), fwd, bwd)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        probe = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot reshape {x.shape} into {shape}") from None
    source = x.shape

    def fwd():
        return x.data.reshape(shape)

    def bwd(g):
        _accumulate(x, g.reshape(source))

    return Tensor._node(probe, "reshape", (x,), fwd, bwd)


def relu(x: Tensor) -> Tensor:
    def fwd():
        return np.maximum(x.data, 0)

    def bwd(g):
        _accumulate(x, g * (x.data > 0))

    return Tensor._node(fwd(), "relu", (x,), fwd, bwd)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out_box = {}

    def fwd():
        out_box["y"] = _sigmoid(x.data)
        return out_box["y"]

    def bwd(g):
        y = out_box["y"]
        _accumulate(x, g * y * (1 - y))

    return Tensor._node(fwd(), "sigmoid", (x,), fwd, bwd)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    out_box = {}

    def fwd():
        shifted = x.data - x.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        out_box["y"] = e / e.sum(axis=-1, keepdims=True)
        return out_box["y"]

    def bwd(g):
        y = out_box["y"]
        _accumulate(x, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return Tensor._node(fwd(), "softmax", (x,), fwd, bwd)


def power(x: Tensor, exponent: float) -> Tensor:
    def fwd():
        return x.data**exponent

    def bwd(g):
        _accumulate(x, g * exponent * x.data ** (exponent - 1))

    return Tensor._node(fwd(), f"pow{exponent}", (x,), fwd, bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layer_norm: gain/bias shapes {gamma.shape}, {beta.shape} do not match last dim of {x.shape}"
        )
    cache = {}

    def fwd():
        mu = x.data.mean(axis=-1, keepdims=True)
        xc = x.data - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
        cache["xhat"], cache["inv"] = xhat, inv
        return xhat * gamma.data + beta.data

    def bwd(g):
        xhat, inv = cache["xhat"], cache["inv"]
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.shape))
        if x.requires_grad:
            gx = g * gamma.data
            dx = inv * (
                gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            )
            _accumulate(x, dx)

    return Tensor._node(fwd(), "layer_norm", (x, gamma, beta), fwd, bwd)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout. Identity unless ``train`` is set and ``p > 0``."""
    if not 0 <= p < 1:
        raise ContractError(f"dropout: probability must lie in [0, 1), got {p}")
    if not train or p == 0:
        return x
    if rng is None:
        raise ContractError("dropout: a generator is required in train mode")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1 - p)

    def fwd():
        return x.data * mask

    def bwd(g):
        _accumulate(x, g * mask)

    return Tensor._node(fwd(), "dropout", (x,), fwd, bwd)


# ---------------------------------------------------------------- composites


def attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention; returns (output, attention weights)."""
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"attention: incompatible q/k/v shapes {q.shape}, {k.shape}, {v.shape}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    weights = softmax(mul(matmul(q, transpose(k)), scale))
    return matmul(weights, v), weights


def dot(a: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    return sum_(mul(a, b), axis=axis)


def l2_normalize(x: Tensor, eps: float = 1e-12) -> Tensor:
    norm_sq = sum_(mul(x, x), axis=-1, keepdims=True)
    return mul(x, power(add(norm_sq, eps), -0.5))


# ---------------------------------------------------------------- graph passes


def topological_order(root: Tensor) -> list[Tensor]:
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
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def forward(root: Tensor) -> Tensor:
    """Re-evaluate every interior node from the current leaf data."""
    for node in topological_order(root):
        if node._forward is not None:
            node.data = node._forward()
    return root


def backward(root: Tensor) -> dict[Tensor, np.ndarray]:
    """Accumulate d(root)/d(leaf) into ``.grad`` and return the leaf gradients."""
    if root.data.size != 1:
        raise ContractError(f"backward: root must be scalar, got shape {root.shape}")
    order = topological_order(root)
    for node in order:
        if node.parents:
            node.grad = None
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return {
        node: (node.grad if node.grad is not None else np.zeros_like(node.data))
        for node in order
        if not node.parents and node.requires_grad
    }


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def gradient_check(fn: Callable[..., Tensor], point, step: float = 1e-3) -> float:
    """Max relative error between backprop and central differences.

    ``point`` is one array/Tensor or a sequence of them; ``fn`` receives
    float64 leaf Tensors in the same arrangement and must return a scalar.
    The error per coordinate is ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if step <= 0:
        raise ContractError(f"gradient_check: step must be positive, got {step}")
    single = isinstance(point, (Tensor, np.ndarray, float, int))
    points = [point] if single else list(point)
    bases = [np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64) for p in points]

    def evaluate(arrays, grad=False):
        leaves = [Tensor(a, requires_grad=grad) for a in arrays]
        out = fn(leaves[0]) if single else fn(*leaves)
        if not np.all(np.isfinite(out.data)):
            raise NumericError("gradient_check: non-finite function value")
        return leaves, out

    leaves, out = evaluate(bases, grad=True)
    for leaf in leaves:
        leaf.grad = None
    backward(out)
    worst = 0.0
    for i, base in enumerate(bases):
        analytic = leaves[i].grad if leaves[i].grad is not None else np.zeros_like(base)
        if not np.all(np.isfinite(analytic)):
            raise NumericError("gradient_check: non-finite analytic gradient")
        flat = base.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            _, hi = evaluate(bases)
            flat[j] = orig - step
            _, lo = evaluate(bases)
            flat[j] = orig
            numeric = (float(hi.data.sum()) - float(lo.data.sum())) / (2 * step)
            a = float(analytic.reshape(-1)[j])
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
