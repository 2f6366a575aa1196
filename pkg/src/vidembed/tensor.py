"""Dense tensors with reverse-mode differentiation on a gradient tape.

Tensors wrap numpy arrays of rank 1-3 (float32 for training, float64 for
gradient verification).  Operations record their adjoint rules on the
currently active GradTape; backward() replays the tape in reverse and
accumulates gradients into the .grad slot of every requires_grad tensor.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    IndexOutOfRange,
    NonScalarLoss,
    ShapeMismatch,
    TapeConsumed,
)

_ACTIVE_TAPE = None


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 3:
            raise ShapeMismatch(f"rank {arr.ndim} > 3 not supported")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class GradTape:
    """Ordered record of primitive ops; replayed in reverse by backward()."""

    def __init__(self):
        self._records = []
        self._consumed = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a GradTape is already active")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def reset(self):
        self._records.clear()
        self._consumed = False


def _record(out, inputs, backfn):
    if _ACTIVE_TAPE is not None and out.requires_grad:
        _ACTIVE_TAPE._records.append((out, inputs, backfn))


def _needs_grad(*tensors):
    return any(t.requires_grad for t in tensors)


def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(tape, loss):
    """Accumulate d(loss)/d(tensor) into .grad for every recorded tensor."""
    if tape._consumed:
        raise TapeConsumed("tape already consumed; call reset() to reuse")
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")
    if not any(out is loss for out, _, _ in tape._records):
        raise ValueError("loss was not produced under this tape")
    tape._consumed = True

    produced = {id(out) for out, _, _ in tape._records}
    grads = {id(loss): np.ones_like(loss.data)}
    for out, inputs, backfn in reversed(tape._records):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for inp, gi in zip(inputs, backfn(g)):
            if gi is None or not inp.requires_grad:
                continue
            if id(inp) in produced:
                acc = grads.get(id(inp))
                grads[id(inp)] = gi if acc is None else acc + gi
            else:
                # leaf: gradients accumulate by addition across fan-out
                inp.grad = gi if inp.grad is None else inp.grad + gi


# ---------------------------------------------------------------------------
# primitive operations


def add(a, b):
    out = Tensor(a.data + b.data, requires_grad=_needs_grad(a, b))
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    return out


def sub(a, b):
    out = Tensor(a.data - b.data, requires_grad=_needs_grad(a, b))
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))
    return out


def mul(a, b):
    out = Tensor(a.data * b.data, requires_grad=_needs_grad(a, b))
    _record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )
    return out


def scale(a, c):
    c = float(c)
    out = Tensor(a.data * c, requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (g * c,))
    return out


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeMismatch(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"inner extents differ: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data, requires_grad=_needs_grad(a, b))
    _record(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def transpose(a):
    out = Tensor(a.data.T, requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (g.T,))
    return out


def sigmoid(a):
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (g * y * (1.0 - y),))
    return out


def tanh(a):
    y = np.tanh(a.data)
    out = Tensor(y, requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (g * (1.0 - y * y),))
    return out


def relu(a):
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (g * mask,))
    return out


def sum_all(a):
    out = Tensor(np.array([a.data.sum()], dtype=a.dtype), requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (np.full_like(a.data, g.reshape(-1)[0]),))
    return out


def row(a, i):
    if a.data.ndim != 2:
        raise ShapeMismatch("row() needs a rank-2 tensor")
    if not 0 <= i < a.shape[0]:
        raise IndexOutOfRange(f"row {i} out of range for {a.shape}")
    out = Tensor(a.data[i : i + 1, :], requires_grad=a.requires_grad)

    def back(g):
        full = np.zeros_like(a.data)
        full[i : i + 1, :] = g
        return (full,)

    _record(out, (a,), back)
    return out


def col_slice(a, j0, j1):
    out = Tensor(a.data[:, j0:j1], requires_grad=a.requires_grad)

    def back(g):
        full = np.zeros_like(a.data)
        full[:, j0:j1] = g
        return (full,)

    _record(out, (a,), back)
    return out


def concat_rows(tensors):
    out = Tensor(
        np.concatenate([t.data for t in tensors], axis=0),
        requires_grad=_needs_grad(*tensors),
    )
    offs = np.cumsum([0] + [t.shape[0] for t in tensors])

    def back(g):
        return tuple(g[offs[i] : offs[i + 1], :] for i in range(len(tensors)))

    _record(out, tuple(tensors), back)
    return out


def concat_cols(tensors):
    out = Tensor(
        np.concatenate([t.data for t in tensors], axis=1),
        requires_grad=_needs_grad(*tensors),
    )
    offs = np.cumsum([0] + [t.shape[1] for t in tensors])

    def back(g):
        return tuple(g[:, offs[i] : offs[i + 1]] for i in range(len(tensors)))

    _record(out, tuple(tensors), back)
    return out


def mean_rows(a):
    n = a.shape[0]
    out = Tensor(a.data.mean(axis=0, keepdims=True), requires_grad=a.requires_grad)
    _record(out, (a,), lambda g: (np.repeat(g / n, n, axis=0),))
    return out


def softmax_rows(a):
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, requires_grad=a.requires_grad)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    _record(out, (a,), back)
    return out


def layer_norm_rows(x, gain, bias, eps=1e-5):
    """Per-row normalization with learnable gain and bias (shape (1, d))."""
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data, requires_grad=_needs_grad(x, gain, bias))

    def back(g):
        gx_hat = g * gain.data
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=1, keepdims=True)
        )
        ggain = (g * xhat).sum(axis=0, keepdims=True)
        gbias = g.sum(axis=0, keepdims=True)
        return (gx, ggain, gbias)

    _record(out, (x, gain, bias), back)
    return out


def l2norm_rows(x, min_norm=1e-12):
    """Normalize each row to unit L2 norm; NormUnderflow on vanishing rows."""
    from .errors import NormUnderflow

    arr = x.data if x.data.ndim == 2 else x.data.reshape(1, -1)
    norms = np.sqrt((arr * arr).sum(axis=1, keepdims=True))
    if np.any(norms < min_norm):
        raise NormUnderflow("row norm below 1e-12")
    y = arr / norms
    out = Tensor(y.reshape(x.shape), requires_grad=x.requires_grad)

    def back(g):
        g2 = g.reshape(arr.shape)
        proj = (g2 * y).sum(axis=1, keepdims=True)
        return (((g2 - y * proj) / norms).reshape(x.shape),)

    _record(out, (x,), back)
    return out


def softmax_cross_entropy(logits, target):
    """Cross-entropy of softmax(logits) against a class index; scalar loss.

    Stabilized via log-sum-exp: loss = log sum_c exp(z_c) - z_target.
    """
    z = logits.data.reshape(-1)
    c = z.shape[0]
    target = int(target)
    if not 0 <= target < c:
        raise IndexOutOfRange(f"target {target} out of range for {c} classes")
    zmax = z.max()
    lse = zmax + np.log(np.exp(z - zmax).sum())
    out = Tensor(
        np.array([lse - z[target]], dtype=logits.dtype),
        requires_grad=logits.requires_grad,
    )

    def back(g):
        p = np.exp(z - lse)
        p[target] -= 1.0
        return ((g.reshape(-1)[0] * p).reshape(logits.shape),)

    _record(out, (logits,), back)
    return out
