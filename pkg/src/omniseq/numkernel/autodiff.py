"""Reverse-mode autodifferentiation over a recorded tape of primitive ops.

Each op records its parents and a backward closure on the output tensor; the
graph reachable from a scalar loss is the tape. :func:`backward` walks it in
reverse topological order and accumulates gradients into every tensor that
requires them. Tapes are single-writer: one backward pass per recorded graph;
independent graphs may run concurrently.

All data is float64. Integer index arrays (token ids, gather/scatter targets)
are plain numpy arrays, never tensors.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DimensionError, OmniseqError
from .backend import kernels


class TapeError(OmniseqError):
    """Backward requested on a tensor that no forward pass produced."""


_grad_enabled = True


class no_grad:
    """Context manager disabling tape recording (inference fast path)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(out_data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Backpropagate from a scalar tensor through the recorded tape."""
    if loss._backward is None and not loss._parents:
        raise TapeError("backward requested before any forward pass recorded ops")
    if loss.data.size != 1:
        raise DimensionError("backward root must be a scalar")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out_data, (a, b), bwd)


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data * s

    def bwd(g):
        _accumulate(a, g * s)

    return _record(out_data, (a,), bwd)


def _swap_last2(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a, b) -> Tensor:
    """np.matmul semantics with broadcasting over leading dims."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise DimensionError(
            f"matmul inner dims differ: {a.data.shape} x {b.data.shape}"
        )
    out_data = np.matmul(a.data, b.data)

    def bwd(g):
        ga = np.matmul(g, _swap_last2(b.data))
        gb = np.matmul(_swap_last2(a.data), g)
        _accumulate(a, _unbroadcast(ga, a.data.shape))
        _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _record(out_data, (a, b), bwd)


def transpose_last2(a) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        _accumulate(a, _swap_last2(g))

    return _record(_swap_last2(a.data).copy(), (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape

    def bwd(g):
        _accumulate(a, g.reshape(old))

    return _record(a.data.reshape(shape), (a,), bwd)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    x = np.ascontiguousarray(a.data)
    out_data = kernels.relu(x)

    def bwd(g):
        _accumulate(a, kernels.relu_bwd(x, np.ascontiguousarray(g)))

    return _record(out_data, (a,), bwd)


def softmax_lastdim(a) -> Tensor:
    """Numerically-stable softmax over the last axis (max subtraction)."""
    a = _as_tensor(a)
    if a.data.shape[-1] == 0:
        raise DimensionError("softmax over an empty axis")
    flat = np.ascontiguousarray(a.data.reshape(-1, a.data.shape[-1]))
    y = kernels.softmax2d(flat)
    out_data = y.reshape(a.data.shape)

    def bwd(g):
        gflat = np.ascontiguousarray(g.reshape(y.shape))
        _accumulate(a, kernels.softmax2d_bwd(y, gflat).reshape(a.data.shape))

    return _record(out_data, (a,), bwd)


def layer_norm(a, gain, bias, eps: float = 1e-8) -> Tensor:
    """Normalize each row of the last axis to zero mean / unit variance, then
    apply the elementwise affine (gain, bias)."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    cols = a.data.shape[-1]
    if gain.data.shape != (cols,) or bias.data.shape != (cols,):
        raise DimensionError("layer_norm gain/bias must have length = last dim")
    flat = np.ascontiguousarray(a.data.reshape(-1, cols))
    y, xhat, rstd = kernels.layernorm_fwd(flat, gain.data, bias.data, eps)

    def bwd(g):
        gflat = np.ascontiguousarray(g.reshape(-1, cols))
        dx, dgain, dbias = kernels.layernorm_bwd(gflat, xhat, rstd, gain.data)
        _accumulate(a, dx.reshape(a.data.shape))
        _accumulate(gain, dgain)
        _accumulate(bias, dbias)

    return _record(y.reshape(a.data.shape), (a, gain, bias), bwd)


def gather(table, ids: np.ndarray) -> Tensor:
    """Look up rows of a 2-D table by an integer array of any shape."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise DimensionError("gather index out of range")
    out_data = table.data[ids]

    def bwd(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        rows = np.ascontiguousarray(g.reshape(-1, table.data.shape[1]))
        kernels.scatter_add_rows(table.grad, ids.reshape(-1), rows)

    return _record(out_data, (table,), bwd)


def take_rows(a, idx: np.ndarray) -> Tensor:
    """Select rows of a 2-D tensor; gradient scatter-adds back."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out_data = kernels.gather_rows(np.ascontiguousarray(a.data), idx)

    def bwd(g):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        kernels.scatter_add_rows(a.grad, idx, np.ascontiguousarray(g))

    return _record(out_data, (a,), bwd)


def scatter_rows(rows, idx: np.ndarray, nrows: int) -> Tensor:
    """Place rows into a zero (nrows, d) tensor at the given row indices.

    Duplicate indices accumulate; the gradient is a plain row gather.
    """
    rows = _as_tensor(rows)
    idx = np.asarray(idx, dtype=np.int64)
    out_data = np.zeros((nrows, rows.data.shape[1]))
    kernels.scatter_add_rows(out_data, idx, np.ascontiguousarray(rows.data))

    def bwd(g):
        _accumulate(rows, kernels.gather_rows(np.ascontiguousarray(g), idx))

    return _record(out_data, (rows,), bwd)


def sum_lastdim(a) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=-1)

    def bwd(g):
        _accumulate(a, np.broadcast_to(g[..., None], a.data.shape).copy())

    return _record(out_data, (a,), bwd)


def mean_all(a) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size
    out_data = np.asarray(a.data.mean())

    def bwd(g):
        _accumulate(a, np.full_like(a.data, float(g) / n))

    return _record(out_data, (a,), bwd)


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.asarray(a.data.sum())

    def bwd(g):
        _accumulate(a, np.full_like(a.data, float(g)))

    return _record(out_data, (a,), bwd)


def dropout(a, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability ``rate`` and scale the
    survivors by 1/(1-rate) so inference needs no rescaling."""
    a = _as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise DimensionError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    out_data = a.data * mask

    def bwd(g):
        _accumulate(a, g * mask)

    return _record(out_data, (a,), bwd)


def sampled_ce(pos, neg) -> Tensor:
    """Mean of -log softmax(positive | positive + negatives) over rows.

    ``pos`` has shape (P,), ``neg`` shape (P, K); returns a scalar tensor.
    """
    pos, neg = _as_tensor(pos), _as_tensor(neg)
    if pos.data.ndim != 1 or neg.data.ndim != 2 or pos.data.shape[0] != neg.data.shape[0]:
        raise DimensionError("sampled_ce expects pos (P,) and neg (P, K)")
    p = pos.data.shape[0]
    losses, probs = kernels.sampled_ce_fwd(
        np.ascontiguousarray(pos.data), np.ascontiguousarray(neg.data)
    )
    out_data = np.asarray(losses.mean())

    def bwd(g):
        coef = float(g) / p
        _accumulate(pos, coef * (probs[:, 0] - 1.0))
        _accumulate(neg, coef * probs[:, 1:])

    return _record(out_data, (pos, neg), bwd)
