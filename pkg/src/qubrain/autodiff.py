"""Reverse-mode automatic differentiation over dense float64 arrays.

Every differentiable operation returns a :class:`Tensor` that remembers its
parents and a backward rule.  :func:`build_tape` linearises the graph behind a
scalar loss into a topologically ordered :class:`Tape`; :meth:`Tensor.backward`
replays that tape in reverse and accumulates gradients into leaf tensors.

Gradients accumulate across calls until :meth:`Tensor.zero_grad` (or an
optimizer's ``zero_grad``) clears them.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

BCE_EPS = 1e-7


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """An operation was called outside its precondition."""


def _as_array(value) -> np.ndarray:
    if isinstance(value, np.ndarray) and value.dtype == np.float64:
        return value
    return np.asarray(value, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (), _backward=None, op: str = ""):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"

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

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis=None) -> "Tensor":
        return reduce("sum", self, axis)

    def mean(self, axis=None) -> "Tensor":
        return reduce("mean", self, axis)

    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        tape = build_tape(self)
        tape.run_backward(self, _as_array(grad))


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Suspend graph recording on this thread (evaluation passes)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str = "") -> Tensor:
    """Create an op output.

    ``backward(g)`` receives the upstream gradient and returns one gradient per
    parent (``None`` for parents that need none).  Nothing is recorded when no
    parent requires a gradient.
    """
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward, op=op)
    return Tensor(data, op=op)


class TapeNode(NamedTuple):
    node_id: int
    input_ids: tuple
    tensor: Tensor


@dataclass
class Tape:
    """Topologically ordered record of the operations behind one output."""

    nodes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def run_backward(self, root: Tensor, seed_grad: np.ndarray) -> None:
        grads: dict[int, np.ndarray] = {id(root): seed_grad}
        pop = grads.pop
        for node_id, _, t in reversed(self.nodes):
            g = pop(node_id, None)
            if g is None:
                continue
            if not t._parents:
                t.grad = g.copy() if t.grad is None else t.grad + g
                continue
            for parent, pg in zip(t._parents, t._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                prev = grads.get(pid)
                grads[pid] = pg if prev is None else prev + pg


def build_tape(root: Tensor) -> Tape:
    """Iterative post-order DFS; each reachable grad-carrying node appears once."""
    order: list[TapeNode] = []
    if not root.requires_grad:
        return Tape(order)
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    append = order.append
    while stack:
        t, expanded = stack.pop()
        if expanded:
            append(TapeNode(id(t), tuple(id(p) for p in t._parents), t))
            continue
        tid = id(t)
        if tid in seen:
            continue
        seen.add(tid)
        stack.append((t, True))
        for p in t._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return Tape(order)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape == b.shape:
        return
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def elementwise(op: str, a, b) -> Tensor:
    if op == "add":
        return add(a, b)
    if op == "sub":
        return sub(a, b)
    if op == "mul":
        return mul(a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a.data, b.data, "add")
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a.data, b.data, "sub")
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a.data, b.data, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return make_node(ad * bd, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return make_node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def transpose(a) -> Tensor:
    a = _wrap(a)
    return make_node(a.data.T, (a,), lambda g: (g.T,), "transpose")


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` for x[batch×in], weight[out×in], bias[out]."""
    x, weight = _wrap(x), _wrap(weight)
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not fit weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is None:
        return make_node(out, (x, weight), lambda g: (g @ wd, g.T @ xd), "linear")
    bias = _wrap(bias)
    out = out + bias.data
    return make_node(out, (x, weight, bias), lambda g: (g @ wd, g.T @ xd, g.sum(axis=0)), "linear")


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    old = a.shape
    return make_node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


# ---------------------------------------------------------------- activations


_BELOW_ONE = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


def _sigmoid(x: np.ndarray) -> np.ndarray:
    s = np.exp(-np.logaddexp(0.0, -x))
    # keep the open interval (0, 1) where float64 would round to an endpoint
    return np.clip(s, _TINY, _BELOW_ONE)


def sigmoid(x) -> Tensor:
    x = _wrap(x)
    s = _sigmoid(x.data)
    return make_node(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x) -> Tensor:
    x = _wrap(x)
    t = np.clip(np.tanh(x.data), -_BELOW_ONE, _BELOW_ONE)
    return make_node(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def relu(x) -> Tensor:
    x = _wrap(x)
    mask = x.data > 0
    return make_node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def activation(kind: str, x) -> Tensor:
    try:
        fn = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def exp(x) -> Tensor:
    x = _wrap(x)
    e = np.exp(x.data)
    return make_node(e, (x,), lambda g: (g * e,), "exp")


def log(x) -> Tensor:
    x = _wrap(x)
    xd = x.data
    return make_node(np.log(xd), (x,), lambda g: (g / xd,), "log")


# ---------------------------------------------------------- structural ops


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_wrap(p) for p in parts]
    if not parts:
        raise DimensionError("concat: nothing to concatenate")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {[p.shape for p in parts]} along axis {axis}: {exc}") from None
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return make_node(out, parts, backward, "concat")


def slice(x, start: int, stop: int | None = None, axis: int = 0) -> Tensor:  # noqa: A001
    x = _wrap(x)
    n = x.shape[axis]
    stop = n if stop is None else stop
    if not (0 <= start <= stop <= n):
        raise IndexError(f"slice [{start}:{stop}] out of range for axis {axis} of length {n}")
    index = [np.s_[:]] * x.data.ndim
    index[axis] = np.s_[start:stop]
    index = tuple(index)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return make_node(x.data[index], (x,), backward, "slice")


def take(x, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate in backward."""
    x = _wrap(x)
    idx = np.asarray(indices, dtype=np.intp)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (full,)

    return make_node(np.take(x.data, idx, axis=axis), (x,), backward, "take")


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_wrap(p) for p in parts]
    out = np.stack([p.data for p in parts], axis=axis)
    return make_node(out, parts, lambda g: tuple(np.moveaxis(g, axis, 0)), "stack")


def expand(x, n: int) -> Tensor:
    """Repeat ``x`` n times along a new leading axis."""
    x = _wrap(x)
    out = np.broadcast_to(x.data, (n,) + x.shape).copy()
    return make_node(out, (x,), lambda g: (g.sum(axis=0),), "expand")


def time_linear(x, weight, bias) -> Tensor:
    """Apply ``linear`` to every step of a steps x batch x features tensor."""
    x = _wrap(x)
    steps, batch = x.shape[:2]
    flat = linear(reshape(x, (steps * batch, x.shape[2])), weight, bias)
    return reshape(flat, (steps, batch, -1))


def reduce(kind: str, x, axis=None) -> Tensor:
    x = _wrap(x)
    shape = x.shape
    if kind == "sum":
        out = x.data.sum(axis=axis)
        scale = 1.0
    elif kind == "mean":
        out = x.data.mean(axis=axis)
        scale = out.size / x.data.size
    else:
        raise ValueError(f"unknown reduction {kind!r}")

    def backward(g):
        g = np.asarray(g) * scale
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_node(np.asarray(out, dtype=np.float64), (x,), backward, kind)


# --------------------------------------------------------------------- losses


def bce_loss(p, y) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p, y = _wrap(p), _wrap(y)
    if p.shape != y.shape:
        raise DimensionError(f"bce_loss: predictions {p.shape} vs targets {y.shape}")
    pd = np.clip(p.data, BCE_EPS, 1.0 - BCE_EPS)
    yd = y.data
    n = pd.size
    loss = -np.mean(yd * np.log(pd) + (1.0 - yd) * np.log(1.0 - pd))
    # clamp passes the gradient through (straight-through) so saturated outputs still learn
    return make_node(np.asarray(loss), (p,), lambda g: (g * (pd - yd) / (pd * (1.0 - pd)) / n,), "bce")


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits, y) -> Tensor:
    """Mean of -log softmax(logits)[y] over the batch."""
    logits = _wrap(logits)
    if logits.data.ndim != 2 or logits.shape[1] < 2:
        raise DimensionError(f"cross_entropy: logits must be batch x C with C >= 2, got {logits.shape}")
    labels = np.asarray(y.data if isinstance(y, Tensor) else y).astype(np.intp).reshape(-1)
    batch, n_class = logits.shape
    if labels.shape[0] != batch:
        raise DimensionError(f"cross_entropy: {batch} rows but {labels.shape[0]} labels")
    if labels.size and (labels.max() >= n_class or labels.min() < 0):
        raise IndexError(f"cross_entropy: class index out of range for C={n_class}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(batch)
    loss = np.mean(logsum - z[rows, labels])
    probs = softmax(logits.data, axis=1)

    def backward(g):
        d = probs.copy()
        d[rows, labels] -= 1.0
        return (g * d / batch,)

    return make_node(np.asarray(loss), (logits,), backward, "cross_entropy")


# -------------------------------------------------------------- grad checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < self.tol)


def relative_error(a, b, floor: float = 1e-3) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(
    f: Callable[..., Tensor],
    inputs: Tensor | Sequence[Tensor],
    tol: float = 1e-5,
    step: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-3,
) -> GradCheckReport:
    """Compare backward() against central finite differences.

    ``f`` is called with no arguments and must read the (mutated in place)
    ``inputs``.  Relative error uses ``max(|a|, |b|, floor)`` as denominator so
    vanishing gradients are compared absolutely.  ``max_coords`` samples a
    random subset of coordinates per input for large parameter sets.
    """
    inputs = [inputs] if isinstance(inputs, Tensor) else list(inputs)
    for t in inputs:
        t.grad = None
    loss = f()
    if loss.size != 1:
        raise ContractError("grad_check: f must be scalar-valued")
    loss.backward()
    worst, checked = 0.0, 0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(flat.size, size=max_coords, replace=False)
        a_flat = analytic.reshape(-1)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + step
            up = f().item()
            flat[k] = orig - step
            down = f().item()
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            worst = max(worst, float(relative_error(a_flat[k], numeric, floor)))
            checked += 1
    return GradCheckReport(worst, tol, checked)

