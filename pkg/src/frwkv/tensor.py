"""Dense f64 tensors with tape-based reverse-mode differentiation.

Only the operations the forecaster needs are provided. Every op that touches
a tensor with ``requires_grad`` appends a record to the active
:class:`ComputationTape`; :func:`backward` replays that tape in reverse.

Broadcasting is one-sided: the result always has the shape of the larger
operand, and the smaller one must be a scalar or right-align against it with
each axis either equal or 1.
"""
from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

_local = threading.local()


def _state():
    if not hasattr(_local, "tape"):
        _local.tape = ComputationTape()
        _local.grad_enabled = True
        _local.flops = None
    return _local


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
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

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class TapeRecord:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class ComputationTape:
    """Ordered log of differentiable operations.

    Records are appended in execution order, so every input of a record was
    produced (if at all) by an earlier record.
    """

    def __init__(self):
        self.records: list[TapeRecord] = []
        self._prev = None

    def __len__(self):
        return len(self.records)

    def record(self, op, inputs, output, backward):
        self.records.append(TapeRecord(op, tuple(inputs), output, backward))

    def clear(self):
        self.records.clear()

    def __enter__(self):
        st = _state()
        self._prev = st.tape
        st.tape = self
        return self

    def __exit__(self, *exc):
        _state().tape = self._prev
        self._prev = None

    def backward(self, loss: Tensor) -> int:
        """Propagate d(loss)/d(.) to every tensor recorded before ``loss``.

        Returns the number of records replayed. The tape is cleared afterwards.
        """
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        end = None
        for idx in range(len(self.records) - 1, -1, -1):
            if self.records[idx].output is loss:
                end = idx
                break
        if end is None:
            raise ContractError("loss was not produced on this tape")

        pending: dict[int, list] = {id(loss): [loss, np.ones_like(loss.data)]}
        visited = 0
        for rec in reversed(self.records[: end + 1]):
            visited += 1
            entry = pending.pop(id(rec.output), None)
            if entry is None:
                continue
            g = entry[1]
            out = rec.output
            out.grad = g if out.grad is None else out.grad + g
            for inp, gi in zip(rec.inputs, rec.backward(g)):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                slot = pending.get(id(inp))
                if slot is None:
                    pending[id(inp)] = [inp, np.asarray(gi, dtype=np.float64)]
                else:
                    slot[1] = slot[1] + gi
        for t, g in pending.values():
            t.grad = g if t.grad is None else t.grad + g
        self.clear()
        return visited


def current_tape() -> ComputationTape:
    return _state().tape


def grad_enabled() -> bool:
    return _state().grad_enabled


@contextlib.contextmanager
def no_grad():
    st = _state()
    prev = st.grad_enabled
    st.grad_enabled = False
    try:
        yield
    finally:
        st.grad_enabled = prev


class FlopCounter:
    """Counts floating-point operations of every op executed inside it."""

    def __init__(self):
        self.total = 0
        self.by_op: dict[str, int] = {}
        self.events: dict[str, int] = {}
        self._prev = None

    def event(self, name: str, n: int = 1):
        self.events[name] = self.events.get(name, 0) + int(n)

    def add(self, op: str, n: int):
        self.total += int(n)
        self.by_op[op] = self.by_op.get(op, 0) + int(n)

    def __enter__(self):
        st = _state()
        self._prev = st.flops
        st.flops = self
        return self

    def __exit__(self, *exc):
        _state().flops = self._prev


def count_flops(op: str, n: int):
    counter = _state().flops
    if counter is not None:
        counter.add(op, n)


def count_event(name: str, n: int = 1):
    counter = _state().flops
    if counter is not None:
        counter.event(name, n)


def make_op(op: str, data: np.ndarray, inputs, backward, flops: int = 0) -> Tensor:
    """Wrap ``data`` as the output of ``op`` and record it if needed.

    ``backward(g)`` must return one gradient (or None) per input.
    """
    count_flops(op, flops)
    st = _state()
    needs = st.grad_enabled and any(isinstance(t, Tensor) and t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = needs
    out.grad = None
    out.name = None
    if needs:
        st.tape.record(op, inputs, out, backward)
    return out


def backward(loss: Tensor) -> int:
    return current_tape().backward(loss)


# --------------------------------------------------------------------------
# broadcasting

def _check_broadcast(a: np.ndarray, b: np.ndarray) -> tuple[int, ...]:
    if a.shape == b.shape:
        return a.shape
    if b.size == 1 and b.ndim <= a.ndim:
        return a.shape
    if a.size == 1 and a.ndim <= b.ndim:
        return b.shape
    for big, small in ((a, b), (b, a)):
        off = big.ndim - small.ndim
        if off >= 0 and all(s in (1, g) for s, g in zip(small.shape, big.shape[off:])):
            return big.shape
    raise DimensionError(f"cannot broadcast shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    off = g.ndim - len(shape)
    if off:
        g = g.sum(axis=tuple(range(off)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _check_broadcast(a.data, b.data)
    return make_op(
        "add", a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        flops=int(np.prod(shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _check_broadcast(a.data, b.data)
    return make_op(
        "sub", a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        flops=int(np.prod(shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _check_broadcast(a.data, b.data)
    return make_op(
        "mul", a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        flops=int(np.prod(shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _check_broadcast(a.data, b.data)
    out = a.data / b.data
    return make_op(
        "div", out, (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
        flops=int(np.prod(shape)),
    )


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return make_op("scale", x.data * c, (x,), lambda g: (g * c,), flops=x.size)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return make_op("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),), flops=4 * x.size)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_op("tanh", out, (x,), lambda g: (g * (1.0 - out * out),), flops=4 * x.size)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_op("exp", out, (x,), lambda g: (g * out,), flops=x.size)


def elementwise(op: str, *args) -> Tensor:
    """Dispatch by name: add, sub, mul, sigmoid, tanh, exp, scale."""
    table = {"add": add, "sub": sub, "mul": mul, "div": div, "sigmoid": sigmoid,
             "tanh": tanh, "exp": exp, "scale": scale}
    try:
        fn = table[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


# --------------------------------------------------------------------------
# linear algebra and shape

def matmul(a, b) -> Tensor:
    """``a[..., m, k] @ b[k, n]``; leading axes of ``a`` act as a batch."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    m = a.size // a.shape[-1]

    def bw(g):
        ga = g @ b.data.T
        a2 = a.data.reshape(-1, a.shape[-1])
        gb = a2.T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return make_op("matmul", out, (a, b), bw, flops=2 * m * b.shape[0] * b.shape[1])


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} to {tuple(shape)}") from None
    return make_op("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_op("transpose", np.transpose(x.data, axes), (x,),
                   lambda g: (np.transpose(g, inv),))


def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_op("sum", np.asarray(out, dtype=np.float64), (x,), bw, flops=x.size)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def l2_normalize(x, eps: float = 1e-12) -> Tensor:
    """Unit Euclidean norm along the last axis; (near-)zero slices pass through."""
    x = as_tensor(x)
    norm = np.sqrt(np.sum(x.data * x.data, axis=-1, keepdims=True))
    small = norm < eps
    den = np.where(small, 1.0, norm)
    out = x.data / den

    def bw(g):
        proj = np.sum(g * out, axis=-1, keepdims=True)
        gx = (g - np.where(small, 0.0, out * proj)) / den
        return (gx,)

    return make_op("l2_normalize", out, (x,), bw, flops=4 * x.size)


def layer_norm(x, eps: float = 1e-5) -> Tensor:
    """Zero mean, unit variance over the last axis (no affine)."""
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    out = xc * inv

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * out).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - out * gxm),)

    return make_op("layer_norm", out, (x,), bw, flops=8 * x.size)


def shift_tokens(x) -> Tensor:
    """Delay by one step along axis -2; the first token becomes zeros."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"shift_tokens needs a [..., L, C] tensor, got {x.shape}")
    out = np.zeros_like(x.data)
    out[..., 1:, :] = x.data[..., :-1, :]

    def bw(g):
        gx = np.zeros_like(g)
        gx[..., :-1, :] = g[..., 1:, :]
        return (gx,)

    return make_op("shift_tokens", out, (x,), bw)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# --------------------------------------------------------------------------
# optimisation helpers

def adam_step(params, grads, moments, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place.

    ``moments`` is a dict with keys ``m``, ``v`` (lists of arrays matching
    ``params``) and ``t`` (step count). Returns False and leaves everything
    untouched if any gradient is non-finite.
    """
    if len(params) != len(grads) or len(params) != len(moments["m"]):
        raise DimensionError("params, grads and moments differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"param shape {p.shape} vs grad shape {g.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        return False
    moments["t"] += 1
    t = moments["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, moments["m"], moments["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return True


class Adam:
    def __init__(self, params: Sequence[Tensor], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = {
            "m": [np.zeros_like(p.data) for p in self.params],
            "v": [np.zeros_like(p.data) for p in self.params],
            "t": 0,
        }
        self.skipped = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self) -> bool:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        ok = adam_step([p.data for p in self.params], grads, self.state, self.lr,
                       self.betas[0], self.betas[1], self.eps)
        if not ok:
            self.skipped += 1
        return ok


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients so their global norm is at most ``max_norm``; returns the pre-clip norm."""
    sq = 0.0
    for p in params:
        if p.grad is not None:
            sq += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(sq))
    if np.isfinite(norm) and norm > max_norm > 0:
        f = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * f
    return norm
