"""Tape-based reverse-mode automatic differentiation on float64 arrays.

Everything the forecaster needs is built from the ops in this module. Each op
computes its result eagerly with numpy and, when a tape is active and any input
requires gradients, records a closure that knows how to push the output
gradient back onto the inputs. ``backward`` replays the records in reverse.

Gradients accumulate (+=) so tensors used in several places get the sum of all
contributions. NaN/Inf are not checked per-op; they propagate to the loss where
the trainer surfaces them.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Dense float64 array plus an optional gradient buffer.

    ``requires_grad`` marks leaves the optimizer updates; outputs of taped ops
    have it set automatically so gradients can flow through them.
    """

    __slots__ = ("values", "grad", "requires_grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Records ops executed under ``with Tape(): ...`` for later replay.

    Entering pushes the tape on a module-level stack; ops consult the top of
    the stack. Tapes may nest (inner tape records, outer does not see those
    ops), though the forecaster only ever uses one at a time.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, object]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, rule):
        self._records.append((out, rule))

    def replay_backward(self):
        for out, rule in reversed(self._records):
            if out.grad is not None:
                rule(out.grad)


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss: Tensor):
    """Run reverse-mode accumulation from a scalar loss.

    Must be called inside the ``with Tape()`` block that produced ``loss``.
    Seeds d(loss)/d(loss) = 1 and replays the tape in reverse; afterwards every
    ``requires_grad`` leaf that influenced the loss holds its gradient in
    ``.grad``.
    """
    if loss.values.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.values.shape}")
    tape = active_tape()
    if tape is None:
        raise RuntimeError("backward called with no active tape")
    loss.grad = np.ones_like(loss.values)
    tape.replay_backward()


def _maybe_record(out: Tensor, rule, *inputs: Tensor) -> Tensor:
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, rule)
    return out


# ---------------------------------------------------------------------------
# linear algebra / shaping
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")
    if a.values.shape[1] != b.values.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.values.shape} @ {b.values.shape}")
    out = Tensor(a.values @ b.values)

    def rule(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.values.T)
        if b.requires_grad:
            b.accumulate_grad(a.values.T @ g)

    return _maybe_record(out, rule, a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a 1-D ``b`` broadcast across rows of 2-D ``a``."""
    bias_broadcast = (
        a.values.ndim == 2 and b.values.ndim == 1 and b.values.shape[0] == a.values.shape[1]
    )
    if not bias_broadcast and a.values.shape != b.values.shape:
        raise ValueError(f"add shape mismatch: {a.values.shape} + {b.values.shape}")
    out = Tensor(a.values + b.values)

    def rule(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0) if bias_broadcast else g)

    return _maybe_record(out, rule, a, b)


def transpose(x: Tensor) -> Tensor:
    if x.values.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    out = Tensor(x.values.T)

    def rule(g):
        if x.requires_grad:
            x.accumulate_grad(g.T)

    return _maybe_record(out, rule, x)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.values.reshape(shape))

    def rule(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.values.shape))

    return _maybe_record(out, rule, x)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of a 2-D tensor."""
    if x.values.ndim != 2:
        raise ValueError("slice_cols expects a 2-D tensor")
    out = Tensor(x.values[:, start:stop])

    def rule(g):
        if x.requires_grad:
            full = np.zeros_like(x.values)
            full[:, start:stop] = g
            x.accumulate_grad(full)

    return _maybe_record(out, rule, x)


def slice_vec(x: Tensor, start: int, stop: int) -> Tensor:
    """Elements ``start:stop`` of a 1-D tensor."""
    if x.values.ndim != 1:
        raise ValueError("slice_vec expects a 1-D tensor")
    out = Tensor(x.values[start:stop])

    def rule(g):
        if x.requires_grad:
            full = np.zeros_like(x.values)
            full[start:stop] = g
            x.accumulate_grad(full)

    return _maybe_record(out, rule, x)


def take_row(x: Tensor, index: int) -> Tensor:
    """Row ``index`` of a 2-D tensor, kept 2-D with shape (1, d)."""
    if x.values.ndim != 2:
        raise ValueError("take_row expects a 2-D tensor")
    out = Tensor(x.values[index : index + 1, :])

    def rule(g):
        if x.requires_grad:
            full = np.zeros_like(x.values)
            full[index : index + 1, :] = g
            x.accumulate_grad(full)

    return _maybe_record(out, rule, x)


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Horizontal concatenation of 2-D tensors with equal row counts."""
    if not parts:
        raise ValueError("concat_cols needs at least one tensor")
    rows = parts[0].values.shape[0]
    for p in parts:
        if p.values.ndim != 2 or p.values.shape[0] != rows:
            raise ValueError("concat_cols expects 2-D tensors with matching rows")
    out = Tensor(np.hstack([p.values for p in parts]))
    offsets = np.cumsum([0] + [p.values.shape[1] for p in parts])

    def rule(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate_grad(g[:, lo:hi])

    return _maybe_record(out, rule, *parts)


def pairwise_sum(a: Tensor, b: Tensor) -> Tensor:
    """All-pairs row sums: (n, d) x (p, d) -> (n, p, d) with out[i,j] = a[i] + b[j]."""
    if a.values.ndim != 2 or b.values.ndim != 2 or a.values.shape[1] != b.values.shape[1]:
        raise ValueError("pairwise_sum expects (n, d) and (p, d) tensors")
    out = Tensor(a.values[:, None, :] + b.values[None, :, :])

    def rule(g):
        if a.requires_grad:
            a.accumulate_grad(g.sum(axis=1))
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return _maybe_record(out, rule, a, b)


def contract_last(t: Tensor, v: Tensor) -> Tensor:
    """Contract the trailing axis of a 3-D tensor with a vector: (n,p,d)·(d,) -> (n,p)."""
    if t.values.ndim != 3 or v.values.ndim != 1 or t.values.shape[2] != v.values.shape[0]:
        raise ValueError("contract_last expects (n, p, d) and (d,) tensors")
    out = Tensor(t.values @ v.values)

    def rule(g):
        if t.requires_grad:
            t.accumulate_grad(g[:, :, None] * v.values[None, None, :])
        if v.requires_grad:
            v.accumulate_grad(np.tensordot(g, t.values, axes=([0, 1], [0, 1])))

    return _maybe_record(out, rule, t, v)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.values > 0
    out = Tensor(np.where(mask, x.values, slope * x.values))

    def rule(g):
        if x.requires_grad:
            # derivative taken as 1 at exactly zero
            deriv = np.where(x.values >= 0, 1.0, slope)
            x.accumulate_grad(g * deriv)

    return _maybe_record(out, rule, x)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    y = np.empty_like(v)
    pos = v >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    y[~pos] = ev / (1.0 + ev)
    out = Tensor(y)

    def rule(g):
        if x.requires_grad:
            x.accumulate_grad(g * y * (1.0 - y))

    return _maybe_record(out, rule, x)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, max-subtracted for stability."""
    if x.values.ndim != 2:
        raise ValueError("softmax_rows expects a 2-D tensor")
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def rule(g):
        if x.requires_grad:
            gy = g * y
            x.accumulate_grad(gy - y * gy.sum(axis=1, keepdims=True))

    return _maybe_record(out, rule, x)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors by 1/(1-rate).

    Identity when not training or when rate == 0. ``rng`` is required only when
    a mask is actually drawn, which keeps inference deterministic for free.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        out = Tensor(x.values.copy())

        def rule_id(g):
            if x.requires_grad:
                x.accumulate_grad(g)

        return _maybe_record(out, rule_id, x)

    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.values.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    factor = keep * scale
    out = Tensor(x.values * factor)

    def rule(g):
        if x.requires_grad:
            x.accumulate_grad(g * factor)

    return _maybe_record(out, rule, x)


# ---------------------------------------------------------------------------
# causal convolution and loss
# ---------------------------------------------------------------------------

def causal_dilated_conv1d(x: Tensor, filters: Tensor, dilation: int = 1) -> Tensor:
    """Causal dilated 1-D convolution over time.

    ``x`` is (w, c_in) with time down the rows; ``filters`` is (K, c_in, c_out).
    The input is left-padded with (K-1)*dilation zeros so the output is again
    (w, c_out) and out[t] only sees x[t], x[t - dilation], ..., i.e. nothing
    from the future:

        out[t] = sum_k  x[t - (K-1-k)*dilation] @ filters[k]
    """
    if x.values.ndim != 2:
        raise ValueError("causal_dilated_conv1d expects x of shape (w, c_in)")
    if filters.values.ndim != 3:
        raise ValueError("causal_dilated_conv1d expects filters of shape (K, c_in, c_out)")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    w, c_in = x.values.shape
    k, f_in, c_out = filters.values.shape
    if k < 1:
        raise ValueError("kernel size must be >= 1")
    if f_in != c_in:
        raise ValueError(f"filter channel mismatch: x has {c_in}, filters expect {f_in}")

    pad = (k - 1) * dilation
    padded = np.zeros((pad + w, c_in))
    padded[pad:] = x.values
    out_vals = np.zeros((w, c_out))
    for j in range(k):
        out_vals += padded[j * dilation : j * dilation + w] @ filters.values[j]
    out = Tensor(out_vals)

    def rule(g):
        if filters.requires_grad:
            gf = np.empty_like(filters.values)
            for j in range(k):
                gf[j] = padded[j * dilation : j * dilation + w].T @ g
            filters.accumulate_grad(gf)
        if x.requires_grad:
            gpad = np.zeros_like(padded)
            for j in range(k):
                gpad[j * dilation : j * dilation + w] += g @ filters.values[j].T
            x.accumulate_grad(gpad[pad:])

    return _maybe_record(out, rule, x, filters)


def rmse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Root-mean-square error over all elements, as a 0-d tensor.

    The gradient w.r.t. pred is (pred - target) / (n * rmse), taken as 0 when
    the residual is identically zero.
    """
    if pred.values.shape != target.values.shape:
        raise ValueError(
            f"rmse_loss shape mismatch: {pred.values.shape} vs {target.values.shape}"
        )
    resid = pred.values - target.values
    n = resid.size
    if n == 0:
        raise ValueError("rmse_loss on empty tensors")
    value = float(np.sqrt(np.mean(resid * resid)))
    out = Tensor(np.float64(value))

    def rule(g):
        if value == 0.0:
            gp = np.zeros_like(resid)
        else:
            gp = float(g) * resid / (n * value)
        if pred.requires_grad:
            pred.accumulate_grad(gp)
        if target.requires_grad:
            target.accumulate_grad(-gp)

    return _maybe_record(out, rule, pred, target)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map x @ weight + bias, composed from taped primitives."""
    return add(matmul(x, weight), bias)
