"""A small reverse-mode autodiff engine over numpy arrays.

Only the operations the policy network needs are provided.  Tensors are
batched ``(N, C, H, W)`` for images.  All math runs in float64 so that
finite-difference checks are meaningful.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = tuple(parents)
        self.requires_grad = requires_grad or any(p.requires_grad for p in self._parents)
        self._backward = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None) -> None:
        """Back-propagate ``grad`` (defaults to ones) through the graph."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents)
        self._accum(np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def _bw(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))
    out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))
    out._backward = _bw
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data @ b.data, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)
    out._backward = _bw
    return out


_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _unary(x: Tensor, y: np.ndarray, dydx: np.ndarray) -> Tensor:
    out = Tensor(y, (x,))
    out._backward = lambda g: x._accum(g * dydx)
    return out


def relu(x: Tensor) -> Tensor:
    return _unary(x, np.maximum(x.data, 0.0), (x.data > 0).astype(np.float64))


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    # keep the open interval (0, 1) under saturation
    y = np.clip(y, _TINY, _BELOW_ONE)
    return _unary(x, y, y * (1.0 - y))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _unary(x, y, 1.0 - y * y)


def softplus(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _unary(x, np.logaddexp(0.0, x.data), s)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))
    out._backward = lambda g: x._accum(g.reshape(x.shape))
    return out


def concat(tensors, axis: int) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis), ts)
    splits = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def _bw(g):
        for t, gi in zip(ts, np.split(g, splits, axis=axis)):
            t._accum(gi)
    out._backward = _bw
    return out


def mean(x: Tensor, axis) -> Tensor:
    """Mean over ``axis`` keeping dimensions."""
    axis = tuple(np.atleast_1d(axis))
    n = int(np.prod([x.shape[a] for a in axis]))
    out = Tensor(x.data.mean(axis=axis, keepdims=True), (x,))
    out._backward = lambda g: x._accum(np.broadcast_to(g / n, x.shape))
    return out


def amax(x: Tensor, axis) -> Tensor:
    """Max over ``axis`` keeping dimensions; ties share the gradient equally."""
    axis = tuple(np.atleast_1d(axis))
    y = x.data.max(axis=axis, keepdims=True)
    out = Tensor(y, (x,))

    def _bw(g):
        mask = (x.data == y).astype(np.float64)
        mask /= mask.sum(axis=axis, keepdims=True)
        x._accum(mask * g)
    out._backward = _bw
    return out


def total(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), (x,))
    out._backward = lambda g: x._accum(np.broadcast_to(g, x.shape))
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation: ``x`` (N, C, H, W), ``w`` (O, C, kh, kw), ``b`` (O,)."""
    N, C, H, W = x.shape
    O, Cw, kh, kw = w.shape
    if C != Cw:
        raise ValueError(f"conv2d channel mismatch: input {C}, kernel {Cw}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N * Ho * Wo, C * kh * kw)
    wm = w.data.reshape(O, -1)
    y = (cols @ wm.T).reshape(N, Ho, Wo, O).transpose(0, 3, 1, 2)
    parents = (x, w) if b is None else (x, w, b)
    if b is not None:
        y = y + b.data[None, :, None, None]
    out = Tensor(np.ascontiguousarray(y), parents)

    def _bw(g):
        gm = g.transpose(0, 2, 3, 1).reshape(N * Ho * Wo, O)
        if w.requires_grad:
            w._accum((gm.T @ cols).reshape(w.shape))
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dcols = (gm @ wm).reshape(N, Ho, Wo, C, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            gx = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i, j]
            x._accum(gx[:, :, padding:padding + H, padding:padding + W])
    out._backward = _bw
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w.T + b`` for ``x`` (N, in), ``w`` (out, in)."""
    out = matmul(x, transpose(w))
    return out if b is None else add(out, b)


def transpose(x: Tensor) -> Tensor:
    out = Tensor(x.data.T, (x,))
    out._backward = lambda g: x._accum(g.T)
    return out


def bilinear_sample(img: Tensor, u: Tensor, v: Tensor) -> Tensor:
    """Sample a (H, W) map at continuous ``(u, v)`` with border clamping.

    Gradients flow to the image and to the coordinates (zero where clamped).
    """
    H, W = img.shape
    uu, vv = u.data, v.data
    uc = np.clip(uu, 0.0, W - 1.0)
    vc = np.clip(vv, 0.0, H - 1.0)
    u0 = np.minimum(np.floor(uc).astype(int), max(W - 2, 0))
    v0 = np.minimum(np.floor(vc).astype(int), max(H - 2, 0))
    u1 = np.minimum(u0 + 1, W - 1)
    v1 = np.minimum(v0 + 1, H - 1)
    fu, fv = uc - u0, vc - v0
    I = img.data
    d00, d01, d10, d11 = I[v0, u0], I[v0, u1], I[v1, u0], I[v1, u1]
    top = (1 - fu) * d00 + fu * d01
    bot = (1 - fu) * d10 + fu * d11
    out = Tensor((1 - fv) * top + fv * bot, (img, u, v))

    def _bw(g):
        if img.requires_grad:
            gi = np.zeros_like(I)
            np.add.at(gi, (v0, u0), g * (1 - fu) * (1 - fv))
            np.add.at(gi, (v0, u1), g * fu * (1 - fv))
            np.add.at(gi, (v1, u0), g * (1 - fu) * fv)
            np.add.at(gi, (v1, u1), g * fu * fv)
            img._accum(gi)
        if u.requires_grad:
            du = (d01 - d00) * (1 - fv) + (d11 - d10) * fv
            u._accum(g * np.where((uu < 0) | (uu > W - 1), 0.0, du))
        if v.requires_grad:
            v._accum(g * np.where((vv < 0) | (vv > H - 1), 0.0, bot - top))
    out._backward = _bw
    return out
