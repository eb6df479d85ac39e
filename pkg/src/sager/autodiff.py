"""Reverse-mode automatic differentiation over dense numpy arrays.

Tensors wrap arrays; while a Tape is active every operation appends its
output (with a backward closure) to the tape, and ``backward`` replays the
tape in reverse execution order, which is a reverse topological order of
the forward graph.  With no active tape the same operations run plain,
which is how evaluation-mode code avoids recording overhead.  Tapes are
thread-local: distinct sentences may run on distinct tapes concurrently.
"""

from __future__ import annotations

import threading

import numpy as np


class DimensionError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class ContractError(ValueError):
    """An operation was invoked outside its contract."""


_tls = threading.local()


def _active():
    return getattr(_tls, "tape", None)


class Tape:
    def __init__(self):
        self.nodes = []

    def __enter__(self):
        stack = getattr(_tls, "stack", None)
        if stack is None:
            stack = _tls.stack = []
        stack.append(self)
        _tls.tape = self
        return self

    def __exit__(self, *exc):
        stack = _tls.stack
        stack.pop()
        _tls.tape = stack[-1] if stack else None
        return False


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backprop")

    def __init__(self, data, parents=(), backprop=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backprop = backprop

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul_const(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Param(Tensor):
    """A trainable leaf tensor with gradient and Adam moment buffers."""

    __slots__ = ("name", "m", "v")

    def __init__(self, name, data):
        # own a C-contiguous buffer (np.array keeps 0-d shapes, unlike
        # ascontiguousarray which promotes them to 1-d)
        super().__init__(np.array(data, order="C"))
        self.name = name
        self.grad = np.zeros_like(self.data)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)


def _out(data, parents, backprop):
    tape = _active()
    if tape is None:
        return Tensor(data)
    t = Tensor(data, parents, backprop)
    tape.nodes.append(t)
    return t


def _acc(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _lift(x, like):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def backward(tape, loss):
    """Populate gradients of everything feeding the scalar ``loss``."""
    if loss.data.shape != ():
        raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        if node._backprop is not None and node.grad is not None:
            node._backprop(node.grad)


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a, b):
    b = _lift(b, a)
    data = a.data + b.data

    def bp(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _out(data, (a, b), bp)


def sub(a, b):
    b = _lift(b, a)
    data = a.data - b.data

    def bp(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return _out(data, (a, b), bp)


def mul(a, b):
    b = _lift(b, a)
    data = a.data * b.data

    def bp(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _out(data, (a, b), bp)


def add_const(a, c):
    data = a.data + c

    def bp(g):
        _acc(a, _unbroadcast(g, a.data.shape))

    return _out(data, (a,), bp)


def mul_const(a, c):
    """Scale by a constant array or scalar (no gradient into the constant)."""
    data = a.data * c

    def bp(g):
        _acc(a, _unbroadcast(g * c, a.data.shape))

    return _out(data, (a,), bp)


def scale(a, s):
    return mul_const(a, s)


def matmul(a, b):
    if a.data.ndim != b.data.ndim or a.data.ndim < 2:
        raise DimensionError(f"matmul rank mismatch: {a.data.shape} @ {b.data.shape}")
    if a.data.shape[:-2] != b.data.shape[:-2] or a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def bp(g):
        _acc(a, g @ np.swapaxes(b.data, -1, -2))
        _acc(b, np.swapaxes(a.data, -1, -2) @ g)

    return _out(data, (a, b), bp)


def relu(a):
    data = np.maximum(a.data, 0)

    def bp(g):
        _acc(a, g * (a.data > 0))

    return _out(data, (a,), bp)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    data = _sigmoid(a.data)

    def bp(g):
        _acc(a, g * data * (1.0 - data))

    return _out(data, (a,), bp)


def softmax(a, axis=-1, mask=None):
    """Softmax along ``axis``; ``mask`` (bool array, broadcastable) marks
    the allowed entries.  Every row must keep at least one allowed entry."""
    x = a.data
    if mask is not None:
        allowed = np.broadcast_to(mask, x.shape)
        if not allowed.any(axis=axis).all():
            raise ContractError("softmax row with no allowed entries")
        x = np.where(allowed, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    data = e / e.sum(axis=axis, keepdims=True)

    def bp(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        _acc(a, data * (g - inner))

    return _out(data, (a,), bp)


def log_softmax(a, axis=-1):
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    data = z - lse

    def bp(g):
        _acc(a, g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _out(data, (a,), bp)


def sigmoid_bce(logits, targets):
    """Elementwise binary cross-entropy from logits, numerically stable."""
    x = logits.data
    t = np.asarray(targets, dtype=x.dtype)
    data = np.maximum(x, 0) - x * t + np.log1p(np.exp(-np.abs(x)))

    def bp(g):
        _acc(logits, g * (_sigmoid(x) - t))

    return _out(data, (logits,), bp)


# ---------------------------------------------------------------------------
# reductions and shape ops


def tsum(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape).copy())

    return _out(data, (a,), bp)


def amax(a, axis):
    """Max-reduce along ``axis``; gradient routes to the first argmax."""
    data = a.data.max(axis=axis)
    idx = np.expand_dims(a.data.argmax(axis=axis), axis)

    def bp(g):
        gx = np.zeros_like(a.data)
        np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis)
        _acc(a, gx)

    return _out(data, (a,), bp)


def concat(parts, axis=0):
    parts = list(parts)
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bp(g):
        start = 0
        for p, s in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + s)
            _acc(p, g[tuple(sl)])
            start += s

    return _out(data, tuple(parts), bp)


def reshape(a, shape):
    data = a.data.reshape(shape)

    def bp(g):
        _acc(a, g.reshape(a.data.shape))

    return _out(data, (a,), bp)


def transpose(a, axes):
    data = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def bp(g):
        _acc(a, np.transpose(g, inv))

    return _out(data, (a,), bp)


def append_ones(a):
    """Append a constant-1 column (bias feature for biaffine forms)."""
    ones = np.ones(a.data.shape[:-1] + (1,), dtype=a.data.dtype)
    data = np.concatenate([a.data, ones], axis=-1)

    def bp(g):
        _acc(a, g[..., :-1])

    return _out(data, (a,), bp)


# ---------------------------------------------------------------------------
# gather / scatter


def take(a, indices, axis=0):
    indices = np.asarray(indices, dtype=np.intp)
    data = np.take(a.data, indices, axis=axis)

    def bp(g):
        gx = np.zeros_like(a.data)
        np.add.at(np.moveaxis(gx, axis, 0), indices, np.moveaxis(g, axis, 0))
        _acc(a, gx)

    return _out(data, (a,), bp)


def take_index_rows(a, idx):
    """a[i, idx[i]] for a 2-D tensor; used for per-row class selection."""
    idx = np.asarray(idx, dtype=np.intp)
    rows = np.arange(a.data.shape[0])
    data = a.data[rows, idx]

    def bp(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, (rows, idx), g)
        _acc(a, gx)

    return _out(data, (a,), bp)


def _pair_index(a, rows, cols):
    if a.ndim == 2:
        return (rows, cols)
    if a.ndim == 3:
        h = np.arange(a.shape[0])[:, None]
        return (h, rows[None, :], cols[None, :])
    raise DimensionError(f"pair indexing needs rank 2 or 3, got {a.ndim}")


def gather_pairs(a, rows, cols):
    """out[..., e] = a[..., rows[e], cols[e]] over the trailing two axes."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    ix = _pair_index(a.data, rows, cols)
    data = a.data[ix]

    def bp(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, ix, g)
        _acc(a, gx)

    return _out(data, (a,), bp)


def scatter_pairs_add(base, rows, cols, contrib):
    """base with contrib[..., e] added at [..., rows[e], cols[e]].

    The (row, col) pairs must be unique, so the contrib gradient is a plain
    gather.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    ix = _pair_index(base.data, rows, cols)
    data = base.data.copy()
    data[ix] += contrib.data

    def bp(g):
        _acc(base, g)
        _acc(contrib, g[ix])

    return _out(data, (base, contrib), bp)


def segment_sum(a, seg, n_segments):
    """Sum rows of a [..., E, k] tensor into [..., n, k] buckets by seg id."""
    seg = np.asarray(seg, dtype=np.intp)
    shape = a.data.shape[:-2] + (n_segments,) + a.data.shape[-1:]
    data = np.zeros(shape, dtype=a.data.dtype)
    if a.data.ndim == 2:
        ix = (seg,)
    elif a.data.ndim == 3:
        ix = (np.arange(a.data.shape[0])[:, None], seg[None, :])
    else:
        raise DimensionError(f"segment_sum needs rank 2 or 3, got {a.data.ndim}")
    np.add.at(data, ix, a.data)

    def bp(g):
        _acc(a, g[ix])

    return _out(data, (a,), bp)


def dropout(a, rate, rng, train):
    """Inverted dropout: eval mode is the identity (the same tensor)."""
    if not train or rate == 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype)
    scale = 1.0 / (1.0 - rate)
    data = a.data * keep * scale

    def bp(g):
        _acc(a, g * keep * scale)

    return _out(data, (a,), bp)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(f, params, step=1e-5):
    """Max relative error of tape gradients vs central finite differences.

    ``f`` must be a deterministic scalar-valued closure over ``params``;
    run it at 64-bit precision for meaningful results.
    """
    with Tape() as tape:
        loss = f()
    for p in params:
        p.grad = np.zeros_like(p.data)
    backward(tape, loss)
    worst = 0.0
    for p in params:
        g_ad = p.grad.reshape(-1).copy()
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = float(f().data)
            flat[i] = keep - step
            dn = float(f().data)
            flat[i] = keep
            g_fd = (up - dn) / (2.0 * step)
            err = abs(g_ad[i] - g_fd) / max(1e-8, abs(g_ad[i]) + abs(g_fd))
            worst = max(worst, err)
    return worst
