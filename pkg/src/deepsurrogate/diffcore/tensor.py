"""Reverse-mode automatic differentiation on numpy arrays.

Graphs are built eagerly: every op computes its value immediately and, when
any input requires a gradient, records its inputs together with a
vector-Jacobian product (vjp) closure. The vjps are themselves written in
terms of the ops below, so running them while recording yields a graph for
the gradient, which is what makes grad-of-grad (the gradient penalty) work.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "UnsupportedOpError",
    "tensor",
    "constant",
    "no_grad",
    "is_grad_enabled",
    "grad",
    "grad_graph",
    "forward",
]

_grad_enabled = True


class ShapeError(ValueError):
    """An op received operands of incompatible shapes."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {', '.join(str(s) for s in shapes)}")


class UnsupportedOpError(RuntimeError):
    """Higher-order differentiation requested through an op that only has a first-order rule."""

    def __init__(self, ops: Iterable[str]):
        self.ops = sorted(set(ops))
        super().__init__(f"no second-order rule for op(s): {', '.join(self.ops)}")


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def _set_grad(enabled: bool):
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = enabled
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A node in the computation graph holding a float64 array."""

    __slots__ = ("data", "requires_grad", "parents", "vjp", "op", "second_order", "name", "__weakref__")

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.vjp: Callable | None = None
        self.op = "leaf"
        self.second_order = True
        self.name = name

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
    def is_leaf(self) -> bool:
        return not self.parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self):
        tag = f", op={self.op}" if self.parents else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __len__(self):
        return self.data.shape[0]

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    @property
    def T(self):
        return transpose(self)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


def forward(root: Tensor) -> np.ndarray:
    """Value of ``root``. Values are computed eagerly while the graph is built."""
    return root.data


def _node(data, parents: tuple, vjp: Callable, op: str, second_order: bool = True) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.vjp = vjp
        out.op = op
        out.second_order = second_order
    else:
        out.requires_grad = False
        out.parents = ()
        out.vjp = None
        out.op = op
        out.second_order = True
    return out


# ---------------------------------------------------------------------------
# elementwise / broadcasting
# ---------------------------------------------------------------------------


def _bshape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _bshape("add", a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None, sum_to(g, b.shape) if needs[1] else None)

    return _node(a.data + b.data, (a, b), vjp, "add")


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _bshape("sub", a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None, sum_to(neg(g), b.shape) if needs[1] else None)

    return _node(a.data - b.data, (a, b), vjp, "sub")


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return scale(a, float(b))
    if not isinstance(a, Tensor) and np.ndim(a) == 0:
        return scale(b, float(a))
    a, b = constant(a), constant(b)
    _bshape("mul", a, b)

    def vjp(g, needs):
        return (
            sum_to(mul(g, b), a.shape) if needs[0] else None,
            sum_to(mul(g, a), b.shape) if needs[1] else None,
        )

    return _node(a.data * b.data, (a, b), vjp, "mul")


def scale(a, c: float) -> Tensor:
    """Multiply by a constant scalar."""
    a = constant(a)

    def vjp(g, needs):
        return (scale(g, c),)

    return _node(a.data * c, (a,), vjp, "scale")


def div(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _bshape("div", a, b)

    def vjp(g, needs):
        ga = sum_to(div(g, b), a.shape) if needs[0] else None
        gb = sum_to(neg(div(mul(g, a), square(b))), b.shape) if needs[1] else None
        return ga, gb

    return _node(a.data / b.data, (a, b), vjp, "div")


def neg(a) -> Tensor:
    a = constant(a)
    return _node(-a.data, (a,), lambda g, needs: (neg(g),), "neg")


def square(a) -> Tensor:
    a = constant(a)
    return _node(a.data * a.data, (a,), lambda g, needs: (mul(g, scale(a, 2.0)),), "square")


def sqrt(a) -> Tensor:
    a = constant(a)
    out = _node(np.sqrt(a.data), (a,), None, "sqrt")
    if out.requires_grad:
        out.vjp = lambda g, needs: (div(scale(g, 0.5), out),)
    return out


def exp(a) -> Tensor:
    a = constant(a)
    out = _node(np.exp(a.data), (a,), None, "exp")
    if out.requires_grad:
        out.vjp = lambda g, needs: (mul(g, out),)
    return out


def log(a) -> Tensor:
    a = constant(a)
    return _node(np.log(a.data), (a,), lambda g, needs: (div(g, a),), "log")


def tanh(a) -> Tensor:
    a = constant(a)
    out = _node(np.tanh(a.data), (a,), None, "tanh")
    if out.requires_grad:
        out.vjp = lambda g, needs: (mul(g, sub(1.0, square(out))),)
    return out


def sigmoid(a) -> Tensor:
    a = constant(a)
    out = _node(1.0 / (1.0 + np.exp(-a.data)), (a,), None, "sigmoid")
    if out.requires_grad:
        out.vjp = lambda g, needs: (mul(g, mul(out, sub(1.0, out))),)
    return out


def _masked(op: str, a: Tensor, mask: np.ndarray) -> Tensor:
    # piecewise-linear ops: the local slope is a constant, so the second derivative is 0
    m = Tensor(mask)
    return _node(a.data * mask, (a,), lambda g, needs: (mul(g, m),), op)


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = constant(a)
    return _masked("leaky_relu", a, np.where(a.data > 0, 1.0, slope))


def relu(a) -> Tensor:
    a = constant(a)
    return _masked("relu", a, (a.data > 0).astype(np.float64))


def abs(a) -> Tensor:  # noqa: A001
    a = constant(a)
    s = Tensor(np.sign(a.data))
    return _node(np.abs(a.data), (a,), lambda g, needs: (mul(g, s),), "abs")


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax with a first-order rule only."""
    a = constant(a)
    x = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, needs):
        gd = g.data
        return (Tensor(y * (gd - (gd * y).sum(axis=axis, keepdims=True))),)

    return _node(y, (a,), vjp, "softmax", second_order=False)


def log_softmax(a, axis: int = -1) -> Tensor:
    """Log-softmax with a first-order rule only."""
    a = constant(a)
    x = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(x).sum(axis=axis, keepdims=True))
    y = x - lse
    p = np.exp(y)

    def vjp(g, needs):
        gd = g.data
        return (Tensor(gd - p * gd.sum(axis=axis, keepdims=True)),)

    return _node(y, (a,), vjp, "log_softmax", second_order=False)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = constant(a)
    axes = _norm_axes(axis, a.ndim)
    in_shape = a.shape
    kept = tuple(1 if i in axes else n for i, n in enumerate(in_shape))

    def vjp(g, needs):
        return (broadcast_to(reshape(g, kept), in_shape),)

    return _node(np.sum(a.data, axis=axes, keepdims=keepdims), (a,), vjp, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = constant(a)
    axes = _norm_axes(axis, a.ndim)
    n = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return scale(sum(a, axis=axes, keepdims=keepdims), 1.0 / n)


def broadcast_to(a, shape) -> Tensor:
    a = constant(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", a.shape, shape) from None
    return _node(data, (a,), lambda g, needs: (sum_to(g, a.shape),), "broadcast_to")


def sum_to(a, shape) -> Tensor:
    """Sum ``a`` down to ``shape``: the adjoint of broadcasting."""
    a = constant(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    lead = a.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, n in enumerate(shape) if n == 1 and a.shape[lead + i] != 1
    )
    data = np.sum(a.data, axis=axes, keepdims=True)
    if lead:
        data = data.reshape(shape)
    return _node(data, (a,), lambda g, needs: (broadcast_to(g, a.shape),), "sum_to")


def reshape(a, shape) -> Tensor:
    a = constant(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None
    in_shape = a.shape
    return _node(data, (a,), lambda g, needs: (reshape(g, in_shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = constant(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _node(np.transpose(a.data, axes), (a,), lambda g, needs: (transpose(g, inv),), "transpose")


def swapaxes(a, i: int, j: int) -> Tensor:
    a = constant(a)
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, axes)


def getitem(a, idx) -> Tensor:
    a = constant(a)
    in_shape = a.shape
    return _node(a.data[idx], (a,), lambda g, needs: (_scatter(g, idx, in_shape),), "getitem")


def _scatter(g, idx, shape) -> Tensor:
    """Place ``g`` at ``idx`` inside zeros of ``shape``; the adjoint of getitem for basic indexing."""
    g = constant(g)
    data = np.zeros(shape)
    if _is_advanced(idx):
        np.add.at(data, idx, g.data)
    else:
        data[idx] = g.data
    return _node(data, (g,), lambda gg, needs: (getitem(gg, idx),), "scatter")


def _is_advanced(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [constant(t) for t in tensors]
    ax = axis % ts[0].ndim
    sizes = [t.shape[ax] for t in ts]
    try:
        data = np.concatenate([t.data for t in ts], axis=ax)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in ts]) from None
    bounds = np.cumsum([0] + sizes)

    def vjp(g, needs):
        out = []
        for k, need in enumerate(needs):
            if not need:
                out.append(None)
                continue
            idx = [slice(None)] * g.ndim
            idx[ax] = slice(int(bounds[k]), int(bounds[k + 1]))
            out.append(getitem(g, tuple(idx)))
        return tuple(out)

    return _node(data, tuple(ts), vjp, "concat")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product for ``a`` of shape (..., n, k) and ``b`` of shape (k,), (k, m) or (..., k, m)."""
    a, b = constant(a), constant(b)
    if b.ndim == 1:
        return reshape(matmul(a, reshape(b, (b.shape[0], 1))), a.shape[:-1])
    if a.ndim == 1:
        return reshape(matmul(reshape(a, (1, a.shape[0])), b), b.shape[:-2] + b.shape[-1:])
    if a.shape[-1] != b.shape[-2] or (b.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ShapeError("matmul", a.shape, b.shape)

    def vjp(g, needs):
        ga = gb = None
        if needs[0]:
            ga = matmul(g, swapaxes(b, -1, -2))
        if needs[1]:
            if b.ndim == 2 and a.ndim > 2:
                k, m = b.shape
                gb = matmul(transpose(reshape(a, (-1, k))), reshape(g, (-1, m)))
            else:
                gb = matmul(swapaxes(a, -1, -2), g)
        return ga, gb

    return _node(a.data @ b.data, (a, b), vjp, "matmul")


def affine(x, weight, bias) -> Tensor:
    """``x @ weight + bias`` with weight of shape (in, out)."""
    x = constant(x)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError("affine", x.shape, weight.shape)
    return add(matmul(x, weight), bias)


def pad_last(a, left: int, right: int) -> Tensor:
    """Zero-pad the last axis."""
    a = constant(a)
    if left == 0 and right == 0:
        return a
    widths = [(0, 0)] * (a.ndim - 1) + [(left, right)]
    n = a.shape[-1]
    idx = (Ellipsis, slice(left, left + n))
    return _node(np.pad(a.data, widths), (a,), lambda g, needs: (getitem(g, idx),), "pad")


def unfold1d(a, kernel: int, stride: int) -> Tensor:
    """Sliding windows over the last axis: (B, C, L) -> (B, L_out, C*K)."""
    a = constant(a)
    B, C, L = a.shape
    lout = (L - kernel) // stride + 1
    idx = np.arange(lout)[:, None] * stride + np.arange(kernel)[None, :]
    data = a.data[:, :, idx].transpose(0, 2, 1, 3).reshape(B, lout, C * kernel)
    return _node(data, (a,), lambda g, needs: (fold1d(g, C, L, kernel, stride),), "unfold1d")


def fold1d(g, channels: int, length: int, kernel: int, stride: int) -> Tensor:
    """Adjoint of :func:`unfold1d`: scatter-add windows back onto (B, C, L)."""
    g = constant(g)
    B, lout, _ = g.shape
    cols = g.data.reshape(B, lout, channels, kernel)
    out = np.zeros((B, channels, length))
    stop = (lout - 1) * stride + 1
    for k in range(kernel):
        out[:, :, k : k + stop : stride] += cols[:, :, :, k].transpose(0, 2, 1)
    return _node(out, (g,), lambda gg, needs: (unfold1d(gg, kernel, stride),), "fold1d")


def conv1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """1-D cross-correlation.

    x: (B, C_in, L) or (C_in, L) or (L,); weight: (C_out, C_in, K) or (K,) for the
    single-channel case. Output (B, C_out, L_out), dropping the dims that were
    added for lower-rank inputs.
    """
    x, weight = constant(x), constant(weight)
    squeeze = ()
    if x.ndim == 1:
        x = reshape(x, (1, 1, x.shape[0]))
        squeeze = (0, 1)
    elif x.ndim == 2:
        x = reshape(x, (1,) + x.shape)
        squeeze = (0,)
    if weight.ndim == 1:
        weight = reshape(weight, (1, 1, weight.shape[0]))
    B, cin, L = x.shape
    cout, wcin, K = weight.shape
    if wcin != cin:
        raise ShapeError("conv1d", x.shape, weight.shape)
    if K > L + 2 * padding:
        raise ShapeError("conv1d", x.shape, weight.shape)
    cols = unfold1d(pad_last(x, padding, padding), K, stride)
    out = matmul(cols, transpose(reshape(weight, (cout, cin * K))))
    if bias is not None:
        out = add(out, bias)
    out = transpose(out, (0, 2, 1))
    if squeeze:
        out = reshape(out, tuple(n for i, n in enumerate(out.shape) if i not in squeeze))
    return out


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------


def l2norm(v, eps: float = 1e-12, axis=-1) -> Tensor:
    """Smoothed Euclidean norm ``sqrt(sum(v**2) + eps)`` along ``axis`` (None for all)."""
    return sqrt(add(sum(square(v), axis=axis), eps))


def mse(a, b) -> Tensor:
    return mean(square(sub(a, b)))


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(root: Tensor, wrt: Sequence[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Gradients of scalar ``root`` with respect to each tensor in ``wrt``.

    With ``create_graph`` the returned gradients are themselves differentiable.
    Tensors that ``root`` does not depend on get a zero gradient.
    """
    if root.size != 1:
        raise ValueError(f"grad needs a scalar root, got shape {root.shape}")
    wrt = list(wrt)
    if not root.requires_grad:
        return [Tensor(np.zeros_like(w.data)) for w in wrt]
    order = _topo(root)
    targets = {id(w) for w in wrt}
    relevant: set[int] = set()
    for node in order:  # parents precede children
        if id(node) in targets or any(id(p) in relevant for p in node.parents):
            relevant.add(id(node))

    grads: dict[int, Tensor] = {id(root): Tensor(np.ones_like(root.data))}
    with _set_grad(create_graph):
        for node in reversed(order):
            if not node.parents or id(node) not in relevant:
                continue
            g = grads.get(id(node)) if id(node) in targets else grads.pop(id(node), None)
            if g is None:
                continue
            if create_graph and not node.second_order:
                raise UnsupportedOpError([node.op])
            needs = tuple(p.requires_grad and id(p) in relevant for p in node.parents)
            for p, pg in zip(node.parents, node.vjp(g, needs)):
                if pg is None or not (p.requires_grad and id(p) in relevant):
                    continue
                prev = grads.get(id(p))
                grads[id(p)] = pg if prev is None else add(prev, pg)
    out = []
    for w in wrt:
        g = grads.get(id(w))
        out.append(g if g is not None else Tensor(np.zeros_like(w.data)))
    return out


def grad_graph(root: Tensor, wrt: Tensor) -> Tensor:
    """Differentiable node computing d(root)/d(wrt)."""
    return grad(root, [wrt], create_graph=True)[0]
