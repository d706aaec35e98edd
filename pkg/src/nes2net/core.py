"""Dense tensors with a recorded tape for reverse-mode differentiation.

Arrays are plain numpy buffers wrapped in :class:`Tensor`.  Every op in this
module computes its forward value eagerly and, while a :class:`Tape` is
active and any input requires a gradient, appends one entry holding a
closure that maps the output cotangent to input cotangents.  ``backward``
replays the tape in reverse.

A multiply-accumulate counter can be switched on with :func:`count_macs`;
only weight-application ops (matmul, conv1d, weighted_sum) report to it.
"""
from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPES = {"f32": np.float32, "f64": np.float64}

_ids = itertools.count(1)
_state = threading.local()


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf from finite inputs."""


class TapeError(RuntimeError):
    pass


def _dtype_of(spec) -> np.dtype:
    if isinstance(spec, str):
        try:
            return np.dtype(DTYPES[spec])
        except KeyError:
            raise ValueError(f"unknown dtype {spec!r}, expected one of {sorted(DTYPES)}") from None
    dt = np.dtype(spec)
    if dt not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dt}")
    return dt


class Tensor:
    """Immutable n-d array node.

    ``requires_grad`` marks nodes whose gradient should be tracked.  The
    wrapped buffer is flagged read-only.
    """

    __slots__ = ("data", "requires_grad", "name", "id")
    __array_priority__ = 100

    def __init__(self, data, dtype=None, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            arr = np.asarray(data)
            dt = arr.dtype if arr.dtype in (np.float32, np.float64) else np.dtype(np.float64)
        else:
            dt = _dtype_of(dtype)
        arr = np.array(data, dtype=dt, copy=True)
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.id = next(_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # operator sugar
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)


class Parameter(Tensor):
    """Trainable leaf.  Its buffer may be swapped wholesale via ``assign``."""

    __slots__ = ()

    def __init__(self, data, dtype=None, name: str | None = None):
        super().__init__(data, dtype=dtype, requires_grad=True, name=name)

    def assign(self, value) -> None:
        arr = np.array(value, dtype=self.dtype, copy=True)
        if arr.shape != self.shape:
            raise ValueError(f"cannot assign shape {arr.shape} to parameter of shape {self.shape}")
        arr.flags.writeable = False
        self.data = arr


@dataclass
class TapeEntry:
    op: str
    inputs: tuple[int, ...]
    output: int
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    shapes: tuple[tuple[int, ...], ...]


@dataclass
class Tape:
    """Ordered record of differentiable ops, consumed by a single ``backward``."""

    entries: list[TapeEntry] = field(default_factory=list)
    consumed: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, entry: TapeEntry) -> None:
        if self.consumed:
            raise TapeError("tape was already consumed by backward; record a new one")
        self.entries.append(entry)


@contextmanager
def recording(tape: Tape | None = None):
    """Record differentiable ops on ``tape`` (a fresh one by default)."""
    tape = Tape() if tape is None else tape
    prev = getattr(_state, "tape", None)
    _state.tape = tape
    try:
        yield tape
    finally:
        _state.tape = prev


@contextmanager
def no_recording():
    prev = getattr(_state, "tape", None)
    _state.tape = None
    try:
        yield
    finally:
        _state.tape = prev


def active_tape() -> Tape | None:
    return getattr(_state, "tape", None)


# ---------------------------------------------------------------------------
# MAC instrumentation

class MacCounter:
    """Accumulates multiply-accumulates by the scope active at the time."""

    def __init__(self):
        self.total = 0
        self.by_scope: dict[str, int] = {}

    def add(self, n: int) -> None:
        n = int(n)
        self.total += n
        scope = current_scope()
        self.by_scope[scope] = self.by_scope.get(scope, 0) + n


@contextmanager
def count_macs():
    counter = MacCounter()
    prev = getattr(_state, "macs", None)
    _state.macs = counter
    try:
        yield counter
    finally:
        _state.macs = prev


@contextmanager
def mac_scope(name: str):
    """Attribute counted MACs to ``name`` (innermost named scope wins)."""
    stack = getattr(_state, "scopes", None)
    if stack is None:
        stack = _state.scopes = []
    stack.append(name)
    try:
        yield
    finally:
        stack.pop()


def current_scope() -> str:
    stack = getattr(_state, "scopes", None)
    return stack[-1] if stack else ""


def _count(n: int) -> None:
    counter = getattr(_state, "macs", None)
    if counter is not None:
        counter.add(n)


# Fault injection for exercising gradient checks: op name -> gradient scale.
_faults: dict[str, float] = {}


@contextmanager
def inject_backward_fault(op: str, scale: float = 1.5):
    """Scale the input gradients produced by every ``op`` entry (test hook)."""
    _faults[op] = scale
    try:
        yield
    finally:
        _faults.pop(op, None)


# ---------------------------------------------------------------------------
# plumbing

def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def _check_finite(op: str, arr: np.ndarray) -> None:
    # a nan or inf anywhere poisons the sum; only a non-finite sum needs the full scan
    if not np.isfinite(np.add.reduce(arr, axis=None)) and not np.isfinite(arr).all():
        raise NonFiniteError(f"{op}: non-finite value in output")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _emit(op: str, out: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    _check_finite(op, out)
    needs = any(t.requires_grad for t in inputs)
    result = Tensor.__new__(Tensor)
    out = np.asarray(out)
    if not out.flags.c_contiguous:
        out = out.copy()
    out.flags.writeable = False
    result.data = out
    result.requires_grad = needs
    result.name = None
    result.id = next(_ids)
    tape = active_tape()
    if needs and tape is not None:
        tape.record(TapeEntry(op, tuple(t.id for t in inputs), result.id, backward,
                              tuple(t.shape for t in inputs)))
    return result


def _binary(a, b) -> tuple[Tensor, Tensor]:
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    if a.dtype != b.dtype:
        raise TypeError(f"dtype mismatch: {a.dtype} vs {b.dtype}")
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}") from None
    return a, b


# ---------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = _binary(a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _binary(a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _binary(a, b)
    ad, bd = a.data, b.data
    return _emit("mul", ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = _binary(a, b)
    ad, bd = a.data, b.data
    if np.any(bd == 0):
        raise ZeroDivisionError("div: zero in denominator")
    out = ad / bd

    def backward(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)
    return _emit("div", out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit("relu", np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _emit("sigmoid", out, (a,), lambda g: (g * out * (1 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _emit("tanh", out, (a,), lambda g: (g * (1 - out * out),))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):       # overflow is reported by the finite check
        out = np.exp(a.data)
    return _emit("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    x = a.data
    if np.any(x < 0):
        raise ValueError("log: negative input")
    with np.errstate(divide="ignore"):     # log(0) is reported by the finite check
        out = np.log(x)
    return _emit("log", out, (a,), lambda g: (g / x,))


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise ValueError("sqrt: negative input")
    out = np.sqrt(a.data)
    return _emit("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def power(a: Tensor, p: float) -> Tensor:
    """``a ** p`` for a constant exponent."""
    x = a.data
    out = np.power(x, p)
    return _emit("power", out, (a,), lambda g: (g * p * np.power(x, p - 1),))


ELEMENTWISE = {
    "add": add, "sub": sub, "mul": mul, "div": div,
    "relu": relu, "sigmoid": sigmoid, "tanh": tanh,
    "exp": exp, "log": log, "sqrt": sqrt,
}


def elementwise(op: str, a, b=None) -> Tensor:
    fn = ELEMENTWISE[op]
    if op in ("add", "sub", "mul", "div"):
        if b is None:
            raise TypeError(f"{op} needs two operands")
        return fn(a, b)
    return fn(as_tensor(a))


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``np.matmul`` semantics; leading batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b, like=a)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul: operands must be at least 2-d")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: inner dimensions differ ({a.shape} @ {b.shape})")
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)
    _count(out.size * a.shape[-1])

    def backward(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)
    return _emit("matmul", out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the two trailing axes."""
    return _emit("transpose", np.swapaxes(a.data, -1, -2), (a,),
                 lambda g: (np.swapaxes(g, -1, -2),))


def conv1d(x: Tensor, w: Tensor, bias: Tensor | None = None, pad: int = 0,
           dilation: int = 1) -> Tensor:
    """Cross-correlation over the trailing (time) axis.

    ``x`` is ``[C_in, T]`` or ``[B, C_in, T]``, ``w`` is ``[C_out, C_in, k]``.
    """
    w = as_tensor(w, like=x)
    if x.dtype != w.dtype:
        raise TypeError(f"dtype mismatch: {x.dtype} vs {w.dtype}")
    if w.ndim != 3:
        raise ValueError("conv1d: weight must be [C_out, C_in, k]")
    c_out, c_in, k = w.shape
    if k < 1 or pad < 0 or dilation < 1:
        raise ValueError("conv1d: need k >= 1, pad >= 0, dilation >= 1")
    unbatched = x.ndim == 2
    xd = x.data[None] if unbatched else x.data
    if xd.ndim != 3 or xd.shape[1] != c_in:
        raise ValueError(f"conv1d: input {x.shape} does not match weight {w.shape}")
    n, _, t = xd.shape
    t_out = t + 2 * pad - dilation * (k - 1)
    if t_out < 1:
        raise ValueError(f"conv1d: output length {t_out} < 1")
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad))) if pad else xd
    span = dilation * (k - 1) + 1
    cols = np.lib.stride_tricks.sliding_window_view(xp, span, axis=2)[..., ::dilation]
    # cols: [n, c_in, t_out, k]
    wd = w.data
    out = np.tensordot(cols, wd, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    _count(n * c_out * c_in * k * t_out)
    inputs: tuple[Tensor, ...] = (x, w)
    if bias is not None:
        bias = as_tensor(bias, like=x)
        if bias.shape != (c_out,):
            raise ValueError("conv1d: bias must be [C_out]")
        out = out + bias.data[None, :, None]
        inputs = (x, w, bias)
    if unbatched:
        out = out[0]

    def backward(g):
        g3 = g[None] if unbatched else g
        gw = np.tensordot(g3, cols, axes=([0, 2], [0, 2]))
        gcols = np.tensordot(g3, wd, axes=([1], [0]))  # [n, t_out, c_in, k]
        gxp = np.zeros(xp.shape, dtype=xp.dtype)
        for j in range(k):
            gxp[:, :, j * dilation:j * dilation + t_out] += gcols[..., j].transpose(0, 2, 1)
        gx = gxp[:, :, pad:pad + t] if pad else gxp
        if unbatched:
            gx = gx[0]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g3.sum(axis=(0, 2)))
        return grads
    return _emit("conv1d", out, inputs, backward)


def weighted_sum(x: Tensor, w: Tensor, axis: int = 0) -> Tensor:
    """``sum_k w[k] * x[..., k, ...]`` along ``axis``; one MAC per weight use."""
    w = as_tensor(w, like=x)
    axis = axis % x.ndim
    k = x.shape[axis]
    if w.shape != (k,):
        raise ValueError(f"weighted_sum: {k} slices but weights of shape {w.shape}")
    xd, wd = x.data, w.data
    moved = np.moveaxis(xd, axis, 0)
    out = np.tensordot(wd, moved, axes=(0, 0))
    _count(out.size * k)

    def backward(g):
        gx = np.moveaxis(wd[(slice(None),) + (None,) * g.ndim] * g[None], 0, axis)
        gw = np.tensordot(moved, g, axes=(tuple(range(1, moved.ndim)), tuple(range(g.ndim))))
        return gx, gw
    return _emit("weighted_sum", out, (x, w), backward)


# ---------------------------------------------------------------------------
# shape ops

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    return _emit("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def split_channels(x: Tensor, parts: int, axis: int = -2) -> list[Tensor]:
    """Split ``x`` into ``parts`` contiguous equal blocks along the channel axis."""
    if x.ndim == 1:
        axis = 0
    axis = axis % x.ndim
    c = x.shape[axis]
    if parts < 1 or c % parts:
        raise ValueError(f"split_channels: {parts} parts do not divide {c} channels")
    width = c // parts
    outs = []
    for i in range(parts):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(i * width, (i + 1) * width)
        sl = tuple(sl)

        def backward(g, sl=sl):
            full = np.zeros(x.shape, dtype=x.dtype)
            full[sl] = g
            return (full,)
        outs.append(_emit("split", x.data[sl], (x,), backward))
    return outs


def concat_channels(parts: Sequence[Tensor], axis: int = -2) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ValueError("concat_channels: nothing to concatenate")
    ndim = parts[0].ndim
    axis = 0 if ndim == 1 else axis % ndim
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _emit("concat", out, parts, lambda g: np.split(g, bounds, axis=axis))


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    out = np.stack([p.data for p in parts], axis=axis)
    ax = axis % out.ndim
    return _emit("stack", out, parts,
                 lambda g: [np.take(g, i, axis=ax) for i in range(len(parts))])


# ---------------------------------------------------------------------------
# reductions

def _axes(x: Tensor, axis) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(x.ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    for ax in axes:
        if not -x.ndim <= ax < x.ndim:
            raise ValueError(f"axis {ax} out of range for rank {x.ndim}")
    axes = tuple(sorted(ax % x.ndim for ax in axes))
    if any(x.shape[ax] == 0 for ax in axes):
        raise ValueError("reduction over an empty axis")
    return axes


def _expand(g: np.ndarray, shape, axes, keepdims) -> np.ndarray:
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _axes(x, axis)
    shape = x.shape
    return _emit("sum", x.data.sum(axis=axes, keepdims=keepdims), (x,),
                 lambda g: (_expand(g, shape, axes, keepdims),))


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _axes(x, axis)
    shape = x.shape
    n = int(np.prod([shape[a] for a in axes]))
    return _emit("mean", x.data.mean(axis=axes, keepdims=keepdims), (x,),
                 lambda g: (_expand(g, shape, axes, keepdims) / n,))


def reduce_var(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Population variance (divide by the element count)."""
    axes = _axes(x, axis)
    shape = x.shape
    n = int(np.prod([shape[a] for a in axes]))
    centered = x.data - x.data.mean(axis=axes, keepdims=True)
    out = (centered * centered).mean(axis=axes, keepdims=keepdims)
    return _emit("var", out, (x,),
                 lambda g: (_expand(g, shape, axes, keepdims) * (2.0 / n) * centered,))


def reduce(op: str, x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    fn = {"sum": reduce_sum, "mean": reduce_mean, "var": reduce_var}[op]
    return fn(x, axis=axis, keepdims=keepdims)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    e = np.exp(xd - xd.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)
    return _emit("softmax", out, (x,),
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    prob = np.exp(out)
    return _emit("log_softmax", out, (x,),
                 lambda g: (g - prob * g.sum(axis=axis, keepdims=True),))


# ---------------------------------------------------------------------------
# reverse sweep

class Gradients(dict):
    """Map from node id to gradient; indexing by a tensor returns zeros if unused."""

    def __getitem__(self, key):
        if isinstance(key, Tensor):
            got = self.get(key.id)
            return np.zeros(key.shape, dtype=key.dtype) if got is None else got
        return super().__getitem__(key)


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse-mode sweep over ``tape`` seeded with d(loss)/d(loss) = 1."""
    if tape.consumed:
        raise TapeError("backward called twice on the same tape")
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape.consumed = True
    grads = Gradients()
    if not loss.requires_grad:
        return grads
    grads[loss.id] = np.ones(loss.shape, dtype=loss.dtype)
    produced = set()
    for entry in reversed(tape.entries):
        g = grads.get(entry.output)
        if g is None:
            continue
        produced.add(entry.output)
        in_grads = entry.backward(g)
        scale = _faults.get(entry.op)
        for nid, shape, ig in zip(entry.inputs, entry.shapes, in_grads):
            if ig is None:
                continue
            if scale is not None:
                ig = ig * scale
            if nid in grads:
                grads[nid] = grads[nid] + ig
            else:
                grads[nid] = np.array(ig, copy=True).reshape(shape)
    for nid in produced:
        if nid != loss.id:
            grads.pop(nid, None)
    return grads


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-5,
               per_input: bool = False):
    """Max relative error between tape gradients and central differences.

    ``f(*inputs)`` must return a scalar.  Non-parameter inputs are promoted to
    :class:`Parameter` copies so they can be perturbed in place.  The error
    for one scalar is ``|analytic - numeric| / max(1, |analytic|)``.  With
    ``per_input`` a list of per-input maxima is returned instead.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    params = [t if isinstance(t, Parameter) else Parameter(t.data) for t in inputs]
    if any(p.dtype != np.float64 for p in params):
        raise TypeError("grad_check needs f64 inputs")
    with recording() as tape:
        loss = f(*params)
    analytic = backward(tape, loss)
    errors = []
    for p in params:
        ana = analytic[p]
        base = p.data.copy()
        num = np.empty_like(base)
        flat = base.reshape(-1)
        for i in range(flat.size):
            probe = flat.copy()
            probe[i] = flat[i] + eps
            p.assign(probe.reshape(base.shape))
            with no_recording():
                up = f(*params).item()
            probe[i] = flat[i] - eps
            p.assign(probe.reshape(base.shape))
            with no_recording():
                down = f(*params).item()
            num.reshape(-1)[i] = (up - down) / (2 * eps)
        p.assign(base)
        err = np.abs(ana - num) / np.maximum(1.0, np.abs(ana))
        errors.append(float(err.max()) if err.size else 0.0)
    if per_input:
        return errors
    return max(errors, default=0.0)


def parameters_of(tensors: Iterable[Tensor]) -> list[Parameter]:
    return [t for t in tensors if isinstance(t, Parameter)]
