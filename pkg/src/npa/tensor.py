"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Values are float64 numpy arrays in row-major layout. Every primitive checks
its operand shapes up front and raises :class:`ShapeError` naming the
primitive and the offending shapes. When any operand has ``requires_grad``
set, the primitive records a backward closure on its output; calling
:func:`backward` on a scalar result then fills ``.grad`` on every reachable
tensor that requires gradients, accumulating additively across uses.

The primitive set is deliberately small: matrix multiply, transpose, add,
scale, elementwise multiply, concatenate, row softmax (optionally masked,
always with max subtraction), log, exp, mean over an axis, sum, masked
fill, row gather, per-row element gather, cross entropy with logits, and a
seeded dropout mask. It is enough to express every model in this package.

Single-threaded by contract: graph construction and backward are not
thread safe, but tensors are immutable after the forward pass and may be
shared read-only.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "add",
    "backward",
    "concat",
    "cross_entropy_with_logits",
    "dropout",
    "exp",
    "gather_rows",
    "log",
    "masked_fill",
    "matmul",
    "mean",
    "mean_rows_canonical",
    "mul",
    "reshape",
    "scale",
    "softmax",
    "subtract",
    "sum_",
    "take_per_row",
    "tensor",
    "transpose",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for a primitive."""


class Tensor:
    """A float64 array plus optional gradient bookkeeping.

    Attributes:
        data: the numpy value, row-major float64.
        requires_grad: whether backward should populate ``grad``.
        grad: accumulated gradient, same shape as ``data``, or None.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar for the common binary ops.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False) -> Tensor:
    """Wrap array-like data as a Tensor."""
    return Tensor(data, requires_grad)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn) -> Tensor:
    """Build an op result, recording the graph only when a parent needs it."""
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def matmul(a, b) -> Tensor:
    """Matrix product of two 2-d tensors."""
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} not conformable")
    out_data = a.data @ b.data

    def back(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(out_data, (a, b), back)


def transpose(a) -> Tensor:
    """Transpose a 2-d tensor."""
    a = _coerce(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got shape {a.data.shape}")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g.T)

    return _make(a.data.T, (a,), back)


def add(a, b) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    a, b = _coerce(a), _coerce(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} differ")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)

    return _make(a.data + b.data, (a, b), back)


def subtract(a, b) -> Tensor:
    """Elementwise difference of two same-shape tensors."""
    a, b = _coerce(a), _coerce(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"subtract: shapes {a.data.shape} and {b.data.shape} differ")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, -g)

    return _make(a.data - b.data, (a, b), back)


def scale(a, s: float) -> Tensor:
    """Multiply a tensor by a python scalar."""
    a = _coerce(a)
    s = float(s)

    def back(g):
        if a.requires_grad:
            _accumulate(a, g * s)

    return _make(a.data * s, (a,), back)


def mul(a, b) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    a, b = _coerce(a), _coerce(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} differ")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)

    return _make(a.data * b.data, (a, b), back)


def concat(parts, axis: int = 1) -> Tensor:
    """Concatenate 2-d tensors along the given axis."""
    parts = [_coerce(p) for p in parts]
    if not parts:
        raise ShapeError("concat: no operands")
    for p in parts:
        if p.data.ndim != 2:
            raise ShapeError(f"concat: expected 2-d operands, got shape {p.data.shape}")
    other = 1 - axis
    sizes = [p.data.shape[other] for p in parts]
    if len(set(sizes)) != 1:
        raise ShapeError(f"concat: mismatched sizes {sizes} on axis {other}")
    widths = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + widths)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = g[lo:hi] if axis == 0 else g[:, lo:hi]
                _accumulate(p, sl)

    return _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), back)


def softmax(a, mask=None) -> Tensor:
    """Row softmax with max subtraction; masked entries get exactly zero.

    ``mask`` is an optional boolean array, True where entries participate.
    Every row must keep at least one entry. A 1-d input is treated as a
    single row.
    """
    a = _coerce(a)
    x = a.data
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] == 0:
        raise ShapeError(f"softmax: expected non-empty rows, got shape {a.data.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if squeeze and mask.ndim == 1:
            mask = mask[None, :]
        if mask.shape != x.shape:
            raise ShapeError(f"softmax: mask shape {mask.shape} does not match {x.shape}")
        if not mask.any(axis=1).all():
            raise ShapeError("softmax: a row has no unmasked entries")
        neg = np.where(mask, x, -np.inf)
        m = neg.max(axis=1, keepdims=True)
        e = np.where(mask, np.exp(x - m), 0.0)
    else:
        m = x.max(axis=1, keepdims=True)
        e = np.exp(x - m)
    p = e / e.sum(axis=1, keepdims=True)
    out_data = p[0] if squeeze else p

    def back(g):
        if not a.requires_grad:
            return
        gp = g[None, :] if squeeze else g
        # d softmax: p * (g - sum(g * p)); masked entries have p == 0.
        inner = (gp * p).sum(axis=1, keepdims=True)
        gx = p * (gp - inner)
        _accumulate(a, gx[0] if squeeze else gx)

    return _make(out_data, (a,), back)


def log(a) -> Tensor:
    """Natural logarithm, elementwise."""
    a = _coerce(a)

    def back(g):
        if a.requires_grad:
            _accumulate(a, g / a.data)

    return _make(np.log(a.data), (a,), back)


def exp(a) -> Tensor:
    """Exponential, elementwise."""
    a = _coerce(a)
    out_data = np.exp(a.data)

    def back(g):
        if a.requires_grad:
            _accumulate(a, g * out_data)

    return _make(out_data, (a,), back)


def mean(a, axis=None) -> Tensor:
    """Mean over one axis, or over all entries when axis is None."""
    a = _coerce(a)
    if axis is not None and axis >= a.data.ndim:
        raise ShapeError(f"mean: axis {axis} out of range for shape {a.data.shape}")
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise ShapeError("mean: empty reduction")

    def back(g):
        if a.requires_grad:
            if axis is None:
                _accumulate(a, np.full_like(a.data, g / n))
            else:
                _accumulate(a, np.expand_dims(g, axis) * np.ones_like(a.data) / n)

    return _make(a.data.mean(axis=axis), (a,), back)


def mean_rows_canonical(a, idx) -> Tensor:
    """Mean of selected rows with order-canonical summation.

    Values are summed per column in sorted order, so any permutation of
    the selected rows produces a bit-identical result. The gradient of a
    mean is uniform over the rows, independent of summation order.
    """
    a = _coerce(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.ndim != 1 or idx.size == 0:
        raise ShapeError(f"mean_rows_canonical: got data {a.data.shape}, index {idx.shape}")
    if idx.min() < 0 or idx.max() >= a.data.shape[0]:
        raise ShapeError(f"mean_rows_canonical: index out of range for {a.data.shape[0]} rows")
    rows = np.sort(a.data[idx], axis=0)
    out_data = rows.mean(axis=0)

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx, np.broadcast_to(g / idx.size, (idx.size, a.data.shape[1])))
            _accumulate(a, acc)

    return _make(out_data, (a,), back)


def sum_(a, axis=None) -> Tensor:
    """Sum over one axis, or over all entries when axis is None."""
    a = _coerce(a)
    if axis is not None and axis >= a.data.ndim:
        raise ShapeError(f"sum: axis {axis} out of range for shape {a.data.shape}")

    def back(g):
        if a.requires_grad:
            if axis is None:
                _accumulate(a, np.full_like(a.data, g))
            else:
                _accumulate(a, np.expand_dims(g, axis) * np.ones_like(a.data))

    return _make(a.data.sum(axis=axis), (a,), back)


def masked_fill(a, mask, value: float) -> Tensor:
    """Replace entries where mask is True with a constant."""
    a = _coerce(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape:
        raise ShapeError(f"masked_fill: mask shape {mask.shape} does not match {a.data.shape}")
    out_data = np.where(mask, float(value), a.data)

    def back(g):
        if a.requires_grad:
            _accumulate(a, np.where(mask, 0.0, g))

    return _make(out_data, (a,), back)


def reshape(a, shape) -> Tensor:
    """View the same row-major data under a new shape."""
    a = _coerce(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.data.shape} as {shape}")

    def back(g):
        if a.requires_grad:
            _accumulate(a, g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), back)


def gather_rows(a, idx) -> Tensor:
    """Select rows of a 2-d tensor by integer index; rows may repeat."""
    a = _coerce(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.ndim != 1:
        raise ShapeError(f"gather_rows: expected 2-d data and 1-d index, got {a.data.shape} and {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.data.shape[0]} rows")

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx, g)
            _accumulate(a, acc)

    return _make(a.data[idx], (a,), back)


def take_per_row(a, idx) -> Tensor:
    """Pick one entry per row of a 2-d tensor: out[t] = a[t, idx[t]]."""
    a = _coerce(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.shape != (a.data.shape[0],):
        raise ShapeError(f"take_per_row: got data {a.data.shape} and index {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[1]):
        raise ShapeError(f"take_per_row: column index out of range for {a.data.shape[1]} columns")
    rows = np.arange(a.data.shape[0])

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, (rows, idx), g)
            _accumulate(a, acc)

    return _make(a.data[rows, idx], (a,), back)


def cross_entropy_with_logits(logits, targets) -> Tensor:
    """Per-row negative log softmax probability of the target class.

    Numerically stable: nll[t] = logsumexp(logits[t]) - logits[t, target[t]].
    Returns a 1-d tensor of row losses.
    """
    logits = _coerce(logits)
    targets = np.asarray(targets, dtype=np.int64)
    x = logits.data
    if x.ndim != 2 or targets.shape != (x.shape[0],):
        raise ShapeError(f"cross_entropy: got logits {x.shape} and targets {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= x.shape[1]):
        raise ShapeError(f"cross_entropy: target out of range for {x.shape[1]} classes")
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    lse = np.log(e.sum(axis=1)) + m[:, 0]
    rows = np.arange(x.shape[0])
    out_data = lse - x[rows, targets]

    def back(g):
        if not logits.requires_grad:
            return
        p = e / e.sum(axis=1, keepdims=True)
        gx = p * g[:, None]
        gx[rows, targets] -= g
        _accumulate(logits, gx)

    return _make(out_data, (logits,), back)


def dropout(a, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a seeded generator; identity when rate is 0."""
    a = _coerce(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate {rate} outside [0, 1)")
    if rate == 0.0:
        return a
    keep = rng.random(a.data.shape) >= rate
    m = keep / (1.0 - rate)

    def back(g):
        if a.requires_grad:
            _accumulate(a, g * m)

    return _make(a.data * m, (a,), back)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a finite scalar loss.

    Populates ``.grad`` on every tensor with ``requires_grad`` reachable
    from ``loss``. Gradients add across multiple uses of the same tensor.
    """
    if not isinstance(loss, Tensor) or loss.data.ndim != 0:
        got = loss.data.shape if isinstance(loss, Tensor) else type(loss)
        raise ShapeError(f"backward: loss must be a scalar tensor, got {got}")
    if not np.isfinite(loss.data):
        raise FloatingPointError("backward: loss is not finite")
    if not loss.requires_grad:
        return

    # Iterative topological order (graphs can be deep for long baskets).
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
