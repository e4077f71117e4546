"""Reverse-mode automatic differentiation on dense float64 arrays.

A ``Tape`` records every operation whose inputs are tracked (parameters with
``requires_grad`` or intermediates produced on the same tape). ``backward``
replays the records in reverse, accumulating gradients into parameter ``grad``
buffers. Tapes are rebuilt per training step; nothing persists between steps.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class GradientError(Exception):
    """Contract violation in tape construction or backward."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class Tape:
    """Linear record of operations; node ids are creation-ordered."""

    _active: "Tape | None" = None

    def __init__(self) -> None:
        self._backward_fns: list[Callable[[dict[int, Array]], None]] = []

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise GradientError("a gradient tape is already active")
        Tape._active = self
        return self

    def __exit__(self, *exc) -> None:
        Tape._active = None

    def _record(self, out: "Tensor", fn: Callable[[dict[int, Array]], None]) -> None:
        out.tape = self
        out.tape_id = len(self._backward_fns)
        self._backward_fns.append(fn)

    def backward(self, loss: "Tensor") -> None:
        if loss.data.size != 1:
            raise GradientError(
                f"backward requires a scalar loss, got shape {loss.data.shape}"
            )
        if loss.tape is not self:
            raise GradientError("loss was not produced on this tape")
        grads: dict[int, Array] = {loss.tape_id: np.ones_like(loss.data)}
        for node_id in range(loss.tape_id, -1, -1):
            if node_id in grads:
                self._backward_fns[node_id](grads)


class Tensor:
    """float64 array participating in reverse-mode differentiation.

    ``grad`` is populated only for tensors with ``requires_grad`` (parameters).
    ``tape``/``tape_id`` identify the producing node on the active tape; a
    detached tensor carries neither and never receives gradient.
    """

    __slots__ = ("data", "requires_grad", "grad", "tape", "tape_id", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self.tape: Tape | None = None
        self.tape_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        nm = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{nm})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return add(self, mul(other, -1.0))

    def __rsub__(self, other) -> "Tensor":
        return add(mul(self, -1.0), other)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def __pow__(self, p: float) -> "Tensor":
        return power(self, p)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def backward(self) -> None:
        if self.tape is None:
            raise GradientError("tensor is not attached to a tape")
        self.tape.backward(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(t: Tensor, tape: Tape | None) -> bool:
    if tape is None:
        return False
    return t.requires_grad or t.tape is tape


def _route(t: Tensor, tape: Tape, grads: dict[int, Array], g: Array) -> None:
    """Send a gradient contribution to a parameter buffer or a tape node."""
    if t.requires_grad:
        t._accumulate(g)
    if t.tape is tape and t.tape_id is not None:
        if t.tape_id in grads:
            grads[t.tape_id] = grads[t.tape_id] + g
        else:
            grads[t.tape_id] = g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _unary(x: Tensor, out_data: Array, local: Callable[[Array], Array]) -> Tensor:
    """Record an elementwise op with derivative ``local(upstream)``."""
    out = Tensor(out_data)
    tape = Tape._active
    if _tracked(x, tape):
        out_id_holder = out

        def bw(grads: dict[int, Array], x=x, out=out_id_holder, tape=tape):
            _route(x, tape, grads, local(grads[out.tape_id]))

        tape._record(out, bw)
    return out


# -- binary ops --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)
    tape = Tape._active
    ta, tb = _tracked(a, tape), _tracked(b, tape)
    if ta or tb:

        def bw(grads, a=a, b=b, out=out, tape=tape, ta=ta, tb=tb):
            g = grads[out.tape_id]
            if ta:
                _route(a, tape, grads, _unbroadcast(g, a.data.shape))
            if tb:
                _route(b, tape, grads, _unbroadcast(g, b.data.shape))

        tape._record(out, bw)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data)
    tape = Tape._active
    ta, tb = _tracked(a, tape), _tracked(b, tape)
    if ta or tb:

        def bw(grads, a=a, b=b, out=out, tape=tape, ta=ta, tb=tb):
            g = grads[out.tape_id]
            if ta:
                _route(a, tape, grads, _unbroadcast(g * b.data, a.data.shape))
            if tb:
                _route(b, tape, grads, _unbroadcast(g * a.data, b.data.shape))

        tape._record(out, bw)
    return out


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data / b.data)
    tape = Tape._active
    ta, tb = _tracked(a, tape), _tracked(b, tape)
    if ta or tb:

        def bw(grads, a=a, b=b, out=out, tape=tape, ta=ta, tb=tb):
            g = grads[out.tape_id]
            if ta:
                _route(a, tape, grads, _unbroadcast(g / b.data, a.data.shape))
            if tb:
                _route(
                    b, tape, grads,
                    _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
                )

        tape._record(out, bw)
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul shapes do not chain: {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)
    tape = Tape._active
    ta, tb = _tracked(a, tape), _tracked(b, tape)
    if ta or tb:

        def bw(grads, a=a, b=b, out=out, tape=tape, ta=ta, tb=tb):
            g = grads[out.tape_id]
            if ta:
                _route(a, tape, grads, g @ b.data.T)
            if tb:
                _route(b, tape, grads, a.data.T @ g)

        tape._record(out, bw)
    return out


def minimum(a, b) -> Tensor:
    """Elementwise min; gradient follows the smaller operand (ties go to a)."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(np.minimum(a.data, b.data))
    tape = Tape._active
    ta, tb = _tracked(a, tape), _tracked(b, tape)
    if ta or tb:
        mask_a = a.data <= b.data

        def bw(grads, a=a, b=b, out=out, tape=tape, ta=ta, tb=tb, mask_a=mask_a):
            g = grads[out.tape_id]
            if ta:
                _route(a, tape, grads, _unbroadcast(g * mask_a, a.data.shape))
            if tb:
                _route(b, tape, grads, _unbroadcast(g * ~mask_a, b.data.shape))

        tape._record(out, bw)
    return out


# -- elementwise -------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0
    return _unary(x, np.where(mask, x.data, 0.0), lambda g: g * mask)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _unary(x, t, lambda g: g * (1.0 - t * t))


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)
    return _unary(x, e, lambda g: g * e)


def log(x: Tensor) -> Tensor:
    return _unary(x, np.log(x.data), lambda g: g / x.data)


def softplus(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d > 0, d + np.log1p(np.exp(-np.abs(d))), np.log1p(np.exp(d)))
    sig = 1.0 / (1.0 + np.exp(-d))
    return _unary(x, y, lambda g: g * sig)


def power(x: Tensor, p: float) -> Tensor:
    return _unary(x, x.data ** p, lambda g: g * p * x.data ** (p - 1.0))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through the unclipped region."""
    mask = (x.data >= lo) & (x.data <= hi)
    return _unary(x, np.clip(x.data, lo, hi), lambda g: g * mask)


def transpose(x: Tensor) -> Tensor:
    # the view (not a copy) keeps tape and tape-free matmuls bit-identical
    return _unary(x, x.data.T, lambda g: g.T)


# -- reductions and shaping ---------------------------------------------------


def tensor_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def local(g: Array) -> Array:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis=axis)
        return np.broadcast_to(g, x.data.shape).copy()

    return _unary(x, out_data, local)


def tensor_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(tensor_sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    tape = Tape._active
    tracked = [_tracked(p, tape) for p in parts]
    if any(tracked):
        sizes = [p.data.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)

        def bw(grads, parts=parts, out=out, tape=tape, tracked=tracked):
            g = grads[out.tape_id]
            for i, p in enumerate(parts):
                if tracked[i]:
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(offsets[i], offsets[i + 1])
                    _route(p, tape, grads, g[tuple(sl)])

        tape._record(out, bw)
    return out


def logsumexp(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Stable log-sum-exp; the max shift is treated as a constant, which
    leaves the softmax gradient exact."""
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = add(x, Tensor(-m))
    out = add(log(tensor_sum(exp(shifted), axis=axis, keepdims=True)), Tensor(m))
    if not keepdims:
        out_sq = Tensor(np.squeeze(out.data, axis=axis))
        tape = Tape._active
        if _tracked(out, tape):

            def bw(grads, out=out, out_sq=out_sq, tape=tape):
                _route(out, tape, grads, np.expand_dims(grads[out_sq.tape_id], axis))

            tape._record(out_sq, bw)
        return out_sq
    return out
