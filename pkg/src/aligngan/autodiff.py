"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tape records every operation in insertion order, so insertion order is a
topological order and the backward pass is a single reverse sweep.  One tape
is owned by one training step and is never shared between steps.

Broadcasting in the elementwise ops is deliberately narrow: operands must have
identical shapes, or one operand must be a scalar (shape ()), or its shape
must equal the other's shape with the leading batch axis dropped.  Anything
else is a ShapeError.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class ShapeError(ValueError):
    """Raised when an op receives shape-incompatible inputs."""

    def __init__(self, op: str, *shapes):
        msg = f"{op}: incompatible shapes " + " vs ".join(
            str(tuple(int(d) for d in s)) for s in shapes
        )
        super().__init__(msg)


class _Node:
    __slots__ = ("op", "value", "parents", "backward")

    def __init__(self, op, value, parents, backward):
        self.op = op
        self.value = value
        self.parents = parents
        self.backward = backward


class Tensor:
    """Handle to a value recorded on a tape."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data: np.ndarray, tape: "Tape", node_id: int):
        self.data = data
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self):
        return self.data.shape


class Tape:
    """Append-only differentiation graph; node ids are insertion indices."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._param_cache: dict = {}

    def record(self, op: str, value: np.ndarray, parents: tuple,
               backward: Optional[Callable]) -> Tensor:
        node_id = len(self.nodes)
        self.nodes.append(_Node(op, value, parents, backward))
        return Tensor(value, self, node_id)

    def leaf(self, value) -> Tensor:
        arr = np.asarray(value, dtype=np.float64)
        return self.record("leaf", arr, (), None)


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Gradient of a scalar loss with respect to every leaf it depends on.

    Returns a map node_id -> gradient array for leaf nodes only; leaves with
    no path to the loss are simply absent.
    """
    if loss.data.shape != ():
        raise ShapeError("backward: loss must be scalar", loss.data.shape)
    grads: dict[int, np.ndarray] = {loss.node_id: np.ones((), dtype=np.float64)}
    for node_id in range(loss.node_id, -1, -1):
        g = grads.pop(node_id, None)
        if g is None:
            continue
        node = tape.nodes[node_id]
        if node.backward is None:
            grads[node_id] = g  # leaf: keep
            continue
        for pid, pg in node.backward(g):
            acc = grads.get(pid)
            grads[pid] = pg if acc is None else acc + pg
    return {nid: g for nid, g in grads.items() if tape.nodes[nid].backward is None}


# ---------------------------------------------------------------------------
# elementwise ops with restricted broadcasting


def _broadcast_check(op: str, a: np.ndarray, b: np.ndarray):
    if a.shape == b.shape:
        return
    if b.shape == () or a.shape == ():
        return
    if a.shape[1:] == b.shape or b.shape[1:] == a.shape:
        return
    raise ShapeError(op, a.shape, b.shape)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return g.sum()
    # leading batch axis was broadcast
    return g.sum(axis=0)


def _binary(op: str, a: Tensor, b: Tensor, fwd, da, db) -> Tensor:
    _broadcast_check(op, a.data, b.data)
    value = fwd(a.data, b.data)

    def bwd(g):
        return (
            (a.node_id, _unbroadcast(da(g, a.data, b.data), a.data.shape)),
            (b.node_id, _unbroadcast(db(g, a.data, b.data), b.data.shape)),
        )

    return a.tape.record(op, value, (a.node_id, b.node_id), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary("mul", a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (not a graph input)."""
    c = float(c)

    def bwd(g):
        return ((a.node_id, g * c),)

    return a.tape.record("scale", a.data * c, (a.node_id,), bwd)


def shift(a: Tensor, c: float) -> Tensor:
    """Add a python constant (not a graph input)."""
    c = float(c)

    def bwd(g):
        return ((a.node_id, g),)

    return a.tape.record("shift", a.data + c, (a.node_id,), bwd)


# ---------------------------------------------------------------------------
# unary ops


def _unary(op: str, a: Tensor, value: np.ndarray, dfn) -> Tensor:
    def bwd(g):
        return ((a.node_id, dfn(g)),)

    return a.tape.record(op, value, (a.node_id,), bwd)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = a.data > 0
    grad_factor = np.where(mask, 1.0, slope)
    return _unary("leaky_relu", a, np.where(mask, a.data, slope * a.data),
                  lambda g: g * grad_factor)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _unary("tanh", a, t, lambda g: g * (1.0 - t * t))


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _unary("sigmoid", a, s, lambda g: g * s * (1.0 - s))


def log(a: Tensor, eps: float = 0.0) -> Tensor:
    """Natural log; with eps > 0 computes log(max(x, eps)).

    Gradient is 1/x where x > eps and exactly 0 on the clamped region.
    """
    if eps > 0.0:
        clamped = np.maximum(a.data, eps)
        grad_factor = np.where(a.data > eps, 1.0 / clamped, 0.0)
        return _unary("log", a, np.log(clamped), lambda g: g * grad_factor)
    if np.any(a.data <= 0.0):
        raise ValueError("log: non-positive input without eps clamp")
    return _unary("log", a, np.log(a.data), lambda g: g / a.data)


def square(a: Tensor) -> Tensor:
    return _unary("square", a, a.data * a.data, lambda g: g * 2.0 * a.data)


def rsqrt(a: Tensor) -> Tensor:
    v = 1.0 / np.sqrt(a.data)
    return _unary("rsqrt", a, v, lambda g: g * (-0.5) * v / a.data)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _unary("mean", a, np.asarray(a.data.mean()),
                  lambda g: np.full(a.data.shape, float(g) / n))


def reshape(a: Tensor, shape) -> Tensor:
    value = a.data.reshape(shape)
    return _unary("reshape", a, value, lambda g: g.reshape(a.data.shape))


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def dfn(g):
        out = np.zeros_like(a.data)
        out[idx] = g
        return out

    return _unary("narrow", a, a.data[idx], dfn)


# ---------------------------------------------------------------------------
# structural ops


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ValueError("concat: empty input list")
    tape = tensors[0].tape
    shapes = [t.data.shape for t in tensors]
    ref = list(shapes[0])
    for s in shapes[1:]:
        if len(s) != len(ref) or any(
            i != axis and s[i] != ref[i] for i in range(len(ref))
        ):
            raise ShapeError("concat", *shapes)
    value = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [s[axis] for s in shapes]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        out = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            out.append((t.node_id, g[tuple(idx)]))
        return tuple(out)

    return tape.record("concat", value, tuple(t.node_id for t in tensors), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError("matmul", a.data.shape, b.data.shape)
    value = a.data @ b.data

    def bwd(g):
        return (
            (a.node_id, g @ b.data.T),
            (b.node_id, a.data.T @ g),
        )

    return a.tape.record("matmul", value, (a.node_id, b.node_id), bwd)


# ---------------------------------------------------------------------------
# convolutions (NCHW; kernel (out_ch, in_ch, kh, kw); symmetric zero padding)


def _pad2d(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(xp, kh, kw, stride, P, Q):
    """Padded (B,C,Hp,Wp) -> (B*P*Q, C*kh*kw) patch matrix."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    B = xp.shape[0]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        B * P * Q, -1)


def _col2im(cols, B, C, H, W, kh, kw, stride, pad, P, Q):
    """Adjoint of _im2col composed with padding: scatter-add patches back."""
    g6 = cols.reshape(B, P, Q, C, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    xp = np.zeros((B, C, H + 2 * pad, W + 2 * pad), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            xp[:, :, u:u + stride * P:stride, v:v + stride * Q:stride] += \
                g6[:, :, u, v]
    if pad:
        return xp[:, :, pad:pad + H, pad:pad + W]
    return xp


def _kernel_matrix(k):
    """Conv kernel (O,C,kh,kw) -> (C*kh*kw, O), matching _im2col's layout."""
    O = k.shape[0]
    return np.ascontiguousarray(k.transpose(1, 2, 3, 0)).reshape(-1, O)


def conv2d(x: Tensor, k: Tensor, bias: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    if x.data.ndim != 4 or k.data.ndim != 4 or x.data.shape[1] != k.data.shape[1]:
        raise ShapeError("conv2d", x.data.shape, k.data.shape)
    B, C, H, W = x.data.shape
    O, _, kh, kw = k.data.shape
    Hp, Wp = H + 2 * pad, W + 2 * pad
    if Hp < kh or Wp < kw or (Hp - kh) % stride or (Wp - kw) % stride:
        raise ShapeError("conv2d: extent not compatible with kernel/stride",
                         x.data.shape, k.data.shape)
    P, Q = (Hp - kh) // stride + 1, (Wp - kw) // stride + 1
    cols = _im2col(_pad2d(x.data, pad), kh, kw, stride, P, Q)
    kmat = _kernel_matrix(k.data)
    value = np.ascontiguousarray(
        (cols @ kmat).reshape(B, P, Q, O).transpose(0, 3, 1, 2))
    parents = [x.node_id, k.node_id]
    if bias is not None:
        if bias.data.shape != (O,):
            raise ShapeError("conv2d bias", bias.data.shape, (O,))
        value = value + bias.data[None, :, None, None]
        parents.append(bias.node_id)

    def bwd(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(B * P * Q, O)
        gx = _col2im(gmat @ kmat.T, B, C, H, W, kh, kw, stride, pad, P, Q)
        gk = (cols.T @ gmat).reshape(C, kh, kw, O).transpose(3, 0, 1, 2)
        out = [(x.node_id, gx), (k.node_id, np.ascontiguousarray(gk))]
        if bias is not None:
            out.append((bias.node_id, g.sum(axis=(0, 2, 3))))
        return tuple(out)

    return x.tape.record("conv2d", value, tuple(parents), bwd)


def transposed_conv2d(y: Tensor, k: Tensor, bias: Tensor | None = None,
                      stride: int = 1, pad: int = 0) -> Tensor:
    """Exact adjoint of conv2d with the same kernel, stride and padding.

    Kernel layout matches conv2d: (y_channels, out_channels, kh, kw).
    Output spatial extent is (P-1)*stride + kh - 2*pad.
    """
    if y.data.ndim != 4 or k.data.ndim != 4 or y.data.shape[1] != k.data.shape[0]:
        raise ShapeError("transposed_conv2d", y.data.shape, k.data.shape)
    B, O, P, Q = y.data.shape
    _, C, kh, kw = k.data.shape
    H = (P - 1) * stride + kh - 2 * pad
    W = (Q - 1) * stride + kw - 2 * pad
    if H < 1 or W < 1:
        raise ShapeError("transposed_conv2d: padding exceeds output extent",
                         y.data.shape, k.data.shape)
    kmat = _kernel_matrix(k.data)
    ymat = y.data.transpose(0, 2, 3, 1).reshape(B * P * Q, O)
    value = _col2im(ymat @ kmat.T, B, C, H, W, kh, kw, stride, pad, P, Q)
    parents = [y.node_id, k.node_id]
    if bias is not None:
        if bias.data.shape != (C,):
            raise ShapeError("transposed_conv2d bias", bias.data.shape, (C,))
        value = value + bias.data[None, :, None, None]
        parents.append(bias.node_id)

    def bwd(g):
        gcols = _im2col(_pad2d(g, pad), kh, kw, stride, P, Q)
        gy = np.ascontiguousarray(
            (gcols @ kmat).reshape(B, P, Q, O).transpose(0, 3, 1, 2))
        gk = (gcols.T @ ymat).reshape(C, kh, kw, O).transpose(3, 0, 1, 2)
        out = [(y.node_id, gy), (k.node_id, np.ascontiguousarray(gk))]
        if bias is not None:
            out.append((bias.node_id, g.sum(axis=(0, 2, 3))))
        return tuple(out)

    return y.tape.record("transposed_conv2d", value, tuple(parents), bwd)


# ---------------------------------------------------------------------------
# verification oracle


def grad_check(f, x, eps: float = 1e-3) -> float:
    """Max relative error between autodiff and central differences.

    f maps a Tensor (on a fresh tape) to a scalar Tensor.  The relative
    error per element is |ad - fd| / max(1, |fd|).
    """
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    xt = tape.leaf(x)
    loss = f(xt)
    ad = backward(tape, loss).get(xt.node_id, np.zeros_like(x))

    def eval_at(arr) -> float:
        t = Tape()
        return float(f(t.leaf(arr)).data)

    flat = x.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = eps
        hi = eval_at((flat + bump).reshape(x.shape))
        lo = eval_at((flat - bump).reshape(x.shape))
        fd = (hi - lo) / (2.0 * eps)
        a = ad.reshape(-1)[i]
        if not (np.isfinite(fd) and np.isfinite(a)):
            raise ValueError(f"grad_check: non-finite value at element {i}")
        worst = max(worst, abs(a - fd) / max(1.0, abs(fd)))
    return worst
