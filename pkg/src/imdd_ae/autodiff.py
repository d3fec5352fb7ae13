"""Minimal reverse-mode automatic differentiation on numpy arrays.

Everything is 64-bit: float64 for electrical-domain quantities, complex128
for the optical field. A forward pass builds a DAG of `Tensor` nodes; calling
``backward()`` on a scalar loss accumulates gradients into every node with
``requires_grad=True``.

Gradients of complex tensors follow the real-pair convention: for
z = a + jb the stored gradient is dL/da + j*dL/db, so a real loss is
differentiated through complex intermediates without Wirtinger bookkeeping.
"""

from __future__ import annotations

import numpy as np

EPS_LOG = 1e-12        # floor applied inside cross-entropy logs
TX_CLIP_MAX = np.pi / 4  # upper edge of the transmitter clipping activation

# Optional per-op finiteness checks (slow; meant for debugging runs).
CHECK_FINITE = False


class Tensor:
    """A node in the computation graph holding a float64/complex128 array."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, parents=(), backward=None):
        arr = np.asarray(values)
        if arr.dtype == np.complex128:
            pass
        elif arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.values = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward
        if CHECK_FINITE and not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite values in tensor")

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def detach(self) -> np.ndarray:
        """Copy of the values, cut loose from the graph."""
        return self.values.copy()

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        return self.grad

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        """Reverse pass from this node. Scalar roots seed with 1."""
        if seed is None:
            if self.size != 1:
                raise ValueError("backward() without a seed needs a scalar root")
            seed = np.ones_like(self.values)
        self.ensure_grad()
        self.grad += seed

        order = _toposort(self)
        for node in order:
            if node._backward is not None:
                node._backward(node.grad)

    # Operator sugar for the common arithmetic.
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


def _toposort(root: Tensor) -> list[Tensor]:
    """Nodes reachable from root, children before parents (iterative DFS)."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))
    order.reverse()
    return order


def lift(x) -> Tensor:
    """Wrap raw arrays/scalars as constant tensors."""
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(values, parents: tuple, backward) -> Tensor:
    """Build a graph node; drops the tape when no parent needs gradients."""
    if any(p.requires_grad for p in parents):
        return Tensor(values, True, parents, backward)
    return Tensor(values)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out = a.values + b.values

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g, a.values.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad += _unbroadcast(g, b.values.shape)

    return make_op(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out = a.values - b.values

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g, a.values.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad -= _unbroadcast(g, b.values.shape)

    return make_op(out, (a, b), backward)


def mul(a, b) -> Tensor:
    """Element-wise (Hadamard) product with broadcasting."""
    a, b = lift(a), lift(b)
    out = a.values * b.values

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g * b.values, a.values.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad += _unbroadcast(g * a.values, b.values.shape)

    return make_op(out, (a, b), backward)


def scale(a: Tensor, k: float) -> Tensor:
    out = a.values * k

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g * k

    return make_op(out, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = lift(a), lift(b)
    out = a.values @ b.values

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g @ b.values.T
        if b.requires_grad:
            b.ensure_grad()
            b.grad += a.values.T @ g

    return make_op(out, (a, b), backward)


def dot(a: Tensor, w) -> Tensor:
    """Scalar <a, w> against a constant weighting array."""
    a = lift(a)
    w = np.asarray(w, dtype=np.float64)
    out = np.asarray(np.sum(a.values * w))

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g * w

    return make_op(out, (a,), backward)


def sum_tensors(parts: list[Tensor]) -> Tensor:
    """Element-wise sum of same-shaped tensors (n-ary add)."""
    out = parts[0].values.copy()
    for p in parts[1:]:
        out += p.values

    def backward(g):
        for p in parts:
            if p.requires_grad:
                p.ensure_grad()
                p.grad += g

    return make_op(out, tuple(parts), backward)


# ------------------------------------------------------- shape manipulation

def reshape(a: Tensor, shape) -> Tensor:
    out = a.values.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g.reshape(a.values.shape)

    return make_op(out, (a,), backward)


def concat_rows(parts: list[Tensor]) -> Tensor:
    """Stack 2-D tensors along axis 0."""
    out = np.concatenate([p.values for p in parts], axis=0)
    offsets = np.cumsum([0] + [p.values.shape[0] for p in parts])

    def backward(g):
        for p, i0, i1 in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.ensure_grad()
                p.grad += g[i0:i1]

    return make_op(out, tuple(parts), backward)


def rows(a: Tensor, i0: int, i1: int) -> Tensor:
    out = a.values[i0:i1]

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad[i0:i1] += g

    return make_op(out, (a,), backward)


def cols(a: Tensor, j0: int, j1: int) -> Tensor:
    out = a.values[:, j0:j1]

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad[:, j0:j1] += g

    return make_op(out, (a,), backward)


def gather_cols(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select columns by (possibly repeating) index array."""
    idx = np.asarray(idx)
    out = a.values[:, idx]

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            np.add.at(a.grad, (slice(None), idx), g)

    return make_op(out, (a,), backward)


def blocks_to_series(blocks: list[Tensor]) -> Tensor:
    """Interleave T blocks of shape (n, B) into one (B*T*n,) series.

    Column b of the batch occupies a contiguous run of T*n samples; within
    a run the blocks appear in time order. Exactly inverted by
    `slot_from_series` applied per slot.
    """
    T = len(blocks)
    n, B = blocks[0].values.shape
    stacked = np.stack([b.values for b in blocks], axis=0)  # (T, n, B)
    out = stacked.transpose(2, 0, 1).reshape(B * T * n)

    def backward(g):
        gs = g.reshape(B, T, n).transpose(1, 2, 0)  # (T, n, B)
        for t, blk in enumerate(blocks):
            if blk.requires_grad:
                blk.ensure_grad()
                blk.grad += gs[t]

    return make_op(out, tuple(blocks), backward)


def slot_from_series(series: Tensor, t: int, T: int, n: int, B: int) -> Tensor:
    """Extract slot t of a `blocks_to_series` layout back as an (n, B) block."""
    out = np.ascontiguousarray(series.values.reshape(B, T, n)[:, t, :].T)

    def backward(g):
        if series.requires_grad:
            series.ensure_grad()
            series.grad.reshape(B, T, n)[:, t, :] += g.T

    return make_op(out, (series,), backward)


# ------------------------------------------------------ pointwise nonlinear

def relu(a) -> Tensor:
    a = lift(a)
    out = np.maximum(a.values, 0.0)
    mask = a.values > 0.0  # subgradient 0 at the kink

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g * mask

    return make_op(out, (a,), backward)


def clip_tx(a) -> Tensor:
    """Transmitter clipping activation: identity on (0, pi/4), flat outside.

    Identical to relu(x) - relu(x - pi/4); derivative 0 at both edges.
    """
    a = lift(a)
    out = np.clip(a.values, 0.0, TX_CLIP_MAX)
    mask = (a.values > 0.0) & (a.values < TX_CLIP_MAX)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g * mask

    return make_op(out, (a,), backward)


def sigmoid(a) -> Tensor:
    a = lift(a)
    x = a.values
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += g * out * (1.0 - out)

    return make_op(out, (a,), backward)


def softmax_cols(a) -> Tensor:
    """Column-wise softmax of an (M, B) tensor (or a 1-D vector)."""
    a = lift(a)
    x = a.values
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    one_d = x.ndim == 1
    if one_d:
        x = x[:, None]
    z = x - x.max(axis=0, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=0, keepdims=True)
    out = y[:, 0] if one_d else y

    def backward(g):
        if a.requires_grad:
            gg = g[:, None] if one_d else g
            gx = y * (gg - np.sum(y * gg, axis=0, keepdims=True))
            a.ensure_grad()
            a.grad += gx[:, 0] if one_d else gx

    return make_op(out, (a,), backward)


def nll_sum(p: Tensor, labels: np.ndarray) -> Tensor:
    """Sum over columns of -log(max(p[label], eps)) for an (M, B) posterior."""
    labels = np.asarray(labels)
    b_idx = np.arange(p.values.shape[1])
    picked = p.values[labels, b_idx]
    safe = np.maximum(picked, EPS_LOG)
    out = np.asarray(-np.log(safe).sum())

    def backward(g):
        if p.requires_grad:
            p.ensure_grad()
            live = picked >= EPS_LOG  # floored entries get zero slope
            p.grad[labels[live], b_idx[live]] += -g / picked[live]

    return make_op(out, (p,), backward)


def cross_entropy(posteriors, labels) -> Tensor:
    """Mean negative log-likelihood of the true entries.

    `posteriors`: one (M, B) tensor or a list of them (one per time slot);
    `labels`: matching zero-based index array, shape (B,) or (T, B).
    """
    if isinstance(posteriors, Tensor):
        posteriors = [posteriors]
        labels = np.asarray(labels).reshape(1, -1)
    labels = np.asarray(labels)
    total = sum_tensors([nll_sum(p, labels[t]) for t, p in enumerate(posteriors)])
    count = len(posteriors) * posteriors[0].values.shape[1]
    return scale(total, 1.0 / count)
