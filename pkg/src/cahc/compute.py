"""Dense reverse-mode autodiff over float64 numpy arrays, plus Adam.

A :class:`Tensor` records the operands that produced it and a closure that
pushes its gradient back to them. :func:`backward` walks the recorded graph
in reverse topological order exactly once per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "tensor",
    "parameter",
    "backward",
    "zero_grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "transpose",
    "reshape",
    "concat_cols",
    "relu",
    "leaky_relu",
    "sigmoid",
    "log",
    "log_sigmoid",
    "exp",
    "clip_min",
    "gather_rows",
    "take",
    "segment_sum",
    "row_mean_pool_by_segments",
    "scale_rows",
    "segment_softmax",
    "row_normalize",
    "cosine_similarity_matrix",
    "log_softmax_rows",
    "softmax_rows",
    "diag",
    "sum_all",
    "mean_all",
    "AdamState",
    "adam_step",
    "finite_diff_check",
    "ShapeError",
    "NonFiniteGradientError",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NonFiniteGradientError(FloatingPointError):
    """A gradient handed to the optimizer contains NaN or Inf."""


class Tensor:
    """A node of the computation graph.

    Leaves created with ``requires_grad=True`` are parameters; their ``grad``
    is filled in by :func:`backward`.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad", "name", "op")

    def __init__(
        self,
        value,
        parents: Sequence["Tensor"] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool = False,
        name: str | None = None,
        op: str = "leaf",
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self._backward = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.name = name
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(op={self.op}, shape={self.shape}{label})"

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(value) -> Tensor:
    """Constant (non-differentiable) tensor."""
    return Tensor(value)


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _node(value, parents, fn, op) -> Tensor:
    out = Tensor(value, parents=parents, op=op)
    if out.requires_grad:
        out._backward = fn
    else:
        out.parents = ()
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        s = state.get(key)
        if s == 2:
            continue
        if s == 1:
            raise RuntimeError("cycle detected in computation graph")
        state[key] = 1
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and state.get(id(p)) != 2:
                if state.get(id(p)) == 1:
                    raise RuntimeError("cycle detected in computation graph")
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Fill ``grad`` on every leaf reachable from the scalar ``loss``.

    Calling it a second time without :func:`zero_grad` on the leaves raises,
    rather than silently accumulating.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    leaves = [n for n in order if n.is_leaf]
    for leaf in leaves:
        if leaf.grad is not None:
            raise RuntimeError(
                f"leaf {leaf.name or leaf!r} already holds a gradient; call zero_grad() first"
            )
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            _accumulate(node, g)
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg
    for leaf in leaves:
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.value)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------- primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op} {a.shape} with {b.shape}") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _node(
        a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add"
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _node(
        a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub"
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (broadcasting) product."""
    _check_broadcast(a, b, "mul")
    av, bv = a.value, b.value
    return _node(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
        "mul",
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _node(a.value * c, (a,), lambda g: (g * c,), "scale")


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def transpose(a: Tensor) -> Tensor:
    return _node(a.value.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.shape
    return _node(a.value.reshape(shape), (a,), lambda g: (g.reshape(orig),), "reshape")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_cols of nothing")
    rows = parts[0].shape[0]
    if any(p.value.ndim != 2 or p.shape[0] != rows for p in parts):
        raise ShapeError(f"concat_cols row mismatch: {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    bounds = np.cumsum([0] + widths)

    def fn(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return _node(np.concatenate([p.value for p in parts], axis=1), tuple(parts), fn, "concat_cols")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _node(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.value > 0, 1.0, slope)
    return _node(a.value * factor, (a,), lambda g: (g * factor,), "leaky_relu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.value)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def log(a: Tensor) -> Tensor:
    if np.any(a.value <= 0):
        raise FloatingPointError("log of non-positive value")
    av = a.value
    return _node(np.log(av), (a,), lambda g: (g / av,), "log")


def log_sigmoid(a: Tensor) -> Tensor:
    """``log(sigmoid(x))`` without overflow: ``-softplus(-x)``."""
    x = a.value
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return _node(out, (a,), lambda g: (g * (1.0 - s),), "log_sigmoid")


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.value)
    return _node(e, (a,), lambda g: (g * e,), "exp")


def clip_min(a: Tensor, floor: float) -> Tensor:
    keep = a.value >= floor
    return _node(np.where(keep, a.value, floor), (a,), lambda g: (g * keep,), "clip_min")


def _check_index(idx: np.ndarray, n: int, what: str) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"{what} id out of range [0, {n})")
    return idx


def gather_rows(a: Tensor, idx) -> Tensor:
    """Rows ``a[idx]`` (repeats allowed); gradient scatters back."""
    n = a.shape[0]
    idx = _check_index(idx, n, "row")
    shape = a.shape

    def fn(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.value[idx], (a,), fn, "gather_rows")


def take(a: Tensor, rows, cols) -> Tensor:
    """Entries ``a[rows[k], cols[k]]`` as a vector."""
    rows = _check_index(rows, a.shape[0], "row")
    cols = _check_index(cols, a.shape[1], "column")
    shape = a.shape

    def fn(g):
        out = np.zeros(shape)
        np.add.at(out, (rows, cols), g)
        return (out,)

    return _node(a.value[rows, cols], (a,), fn, "take")


def segment_sum(a: Tensor, segments, n_segments: int) -> Tensor:
    """Sum rows of ``a`` into ``n_segments`` buckets given by ``segments``."""
    seg = _check_index(segments, n_segments, "segment")
    if seg.shape[0] != a.shape[0]:
        raise ShapeError(f"segment map length {seg.shape[0]} != rows {a.shape[0]}")
    out = np.zeros((n_segments,) + a.shape[1:])
    np.add.at(out, seg, a.value)
    return _node(out, (a,), lambda g: (g[seg],), "segment_sum")


def row_mean_pool_by_segments(a: Tensor, rows, segments, n_segments: int) -> Tensor:
    """Mean of ``a[rows[k]]`` over all k sharing ``segments[k]``.

    Every segment must be non-empty.
    """
    rows = _check_index(rows, a.shape[0], "row")
    seg = _check_index(segments, n_segments, "segment")
    counts = np.bincount(seg, minlength=n_segments).astype(np.float64)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"segment {empty} is empty; mean pooling undefined")
    weights = 1.0 / counts[seg]
    picked = gather_rows(a, rows)
    return segment_sum(scale_rows(picked, weights), seg, n_segments)


def scale_rows(a: Tensor, w: np.ndarray) -> Tensor:
    """Multiply row k of ``a`` by the constant ``w[k]``."""
    w = np.asarray(w, dtype=np.float64)
    wv = w.reshape((-1,) + (1,) * (a.value.ndim - 1))
    return _node(a.value * wv, (a,), lambda g: (g * wv,), "scale_rows")


def segment_softmax(scores: Tensor, segments, n_segments: int) -> Tensor:
    """Softmax of a score vector within each segment.

    ``scores`` may be ``(P,)`` or a ``(P, 1)`` column; the output keeps its shape.
    """
    seg = _check_index(segments, n_segments, "segment")
    shape = scores.shape
    if not (len(shape) == 1 or (len(shape) == 2 and shape[1] == 1)) or shape[0] != seg.shape[0]:
        raise ShapeError(f"segment_softmax scores {shape} vs map {seg.shape}")
    s = scores.value.reshape(-1)
    seg_max = np.full(n_segments, -np.inf)
    np.maximum.at(seg_max, seg, s)
    e = np.exp(s - seg_max[seg])
    denom = np.zeros(n_segments)
    np.add.at(denom, seg, e)
    alpha = e / denom[seg]

    def fn(g):
        g = g.reshape(-1)
        dot = np.zeros(n_segments)
        np.add.at(dot, seg, g * alpha)
        return ((alpha * (g - dot[seg])).reshape(shape),)

    return _node(alpha.reshape(shape), (scores,), fn, "segment_softmax")


def row_normalize(a: Tensor, eps: float | None = None) -> Tensor:
    """Rows scaled to unit Euclidean norm.

    With ``eps=None`` a zero row raises; otherwise norms are floored at ``eps``.
    """
    x = a.value
    norms = np.sqrt(np.sum(x * x, axis=1))
    if eps is None:
        bad = np.flatnonzero(norms == 0)
        if bad.size:
            raise ZeroDivisionError(f"row {int(bad[0])} has zero norm")
        denom = norms
        floored = np.zeros_like(norms, dtype=bool)
    else:
        floored = norms < eps
        denom = np.where(floored, eps, norms)
    y = x / denom[:, None]

    def fn(g):
        proj = np.where(floored, 0.0, np.sum(g * y, axis=1))
        return ((g - y * proj[:, None]) / denom[:, None],)

    return _node(y, (a,), fn, "row_normalize")


def cosine_similarity_matrix(a: Tensor, b: Tensor, eps: float | None = None) -> Tensor:
    """``S[i, j] = cos(a_i, b_j)``."""
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"cosine_similarity_matrix {a.shape} vs {b.shape}")
    return matmul(row_normalize(a, eps), transpose(row_normalize(b, eps)))


def log_softmax_rows(a: Tensor) -> Tensor:
    x = a.value
    m = x.max(axis=1, keepdims=True)
    z = x - m
    lse = np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _node(out, (a,), lambda g: (g - p * g.sum(axis=1, keepdims=True),), "log_softmax_rows")


def softmax_rows(a: Tensor) -> Tensor:
    x = a.value
    e = np.exp(x - x.max(axis=1, keepdims=True))
    p = e / e.sum(axis=1, keepdims=True)
    return _node(p, (a,), lambda g: (p * (g - np.sum(g * p, axis=1, keepdims=True)),), "softmax_rows")


def diag(a: Tensor) -> Tensor:
    if a.value.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"diag of {a.shape}")
    return _node(np.diag(a.value).copy(), (a,), lambda g: (np.diag(g),), "diag")


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _node(np.sum(a.value), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean_all(a: Tensor) -> Tensor:
    n = a.value.size
    if n == 0:
        raise ShapeError("mean of empty tensor")
    return scale(sum_all(a), 1.0 / n)


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """One in-place Adam update using each parameter's ``grad``.

    Weight decay is added to the gradient (``g + wd * p``) before the moment
    updates. Parameters without a gradient are treated as having zero grad.
    """
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if len(state.m) != len(params):
        raise ShapeError("optimizer state does not match parameter list")
    grads = []
    for i, p in enumerate(params):
        g = np.zeros_like(p.value) if p.grad is None else p.grad
        if g.shape != p.value.shape or state.m[i].shape != p.value.shape:
            raise ShapeError(f"gradient/state shape mismatch for {p.name or i}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter {p.name or i}")
        grads.append(g)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            g = g + state.weight_decay * p.value
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------- gradient check


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> float:
    """Max relative error between backward and central-difference gradients.

    ``f`` rebuilds the scalar loss from the current ``params`` values. With
    ``max_coords`` set, that many coordinates per parameter are sampled.
    Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``; the
    floor keeps round-off on near-zero gradients from reading as large
    relative error. Returns 0 when every gradient is exactly zero.
    """
    zero_grad(params)
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params]
    zero_grad(params)
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            up = f().item()
            flat[c] = orig - h
            down = f().item()
            flat[c] = orig
            num = (up - down) / (2.0 * h)
            an = ga.reshape(-1)[c]
            if not (np.isfinite(num) and np.isfinite(an)):
                return float("inf")
            if num == an:
                continue
            worst = max(worst, abs(num - an) / max(abs(num), abs(an), floor))
    return worst
