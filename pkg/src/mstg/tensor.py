"""Dense float tensors with a reverse-mode differentiation tape.

A :class:`Tensor` wraps a contiguous row-major numpy array and is treated as
immutable once built (optimizers mutate parameter ``.data`` only between
tapes). While a :class:`Tape` is active in the current thread, every primitive
applied to a tensor that requires gradients appends one node to the tape;
``Tape.gradients`` replays the nodes in reverse to produce one gradient array
per requested tensor.

Non-finite values (NaN/Inf) are rejected at every tensor construction, so a
numerical blow-up surfaces at the primitive that produced it rather than as a
silently corrupted loss.

Broadcasting in binary elementwise ops is restricted to two patterns: a
``(1, n)`` row against the rows of an ``(m, n)`` matrix, and an ``(m, 1)``
column of per-row scalars against an ``(m, n)`` matrix. Anything else raises
:class:`DimensionError`.
"""

import math
import threading

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested primitive."""


class NonFiniteError(ArithmeticError):
    """A tensor came out of a primitive containing NaN or Inf."""


_STATE = threading.local()


def _active_tape():
    return getattr(_STATE, "tape", None)


def _ensure_finite(data, what):
    # one-pass probe; the full scan only runs when the probe trips
    probe = float(data.sum()) if data.size else 0.0
    if not math.isfinite(probe) and not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite values in {what}")


class Tensor:
    """Immutable dense array plus differentiation metadata.

    ``requires_grad`` marks the tensor as a gradient target; ``frozen`` lets
    the optimizer skip a parameter without detaching it from the tape.
    """

    __slots__ = ("data", "requires_grad", "name", "frozen", "grad")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(np.float64)
        arr = np.ascontiguousarray(arr)
        _ensure_finite(arr, name or "tensor")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.frozen = False
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def parameter(data, name=None):
    """Wrap ``data`` as a trainable tensor."""
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of primitive applications for one forward pass.

    Nodes are appended in execution order, which is already a topological
    order because tensors are immutable; the backward pass walks the list in
    reverse accumulating vector-Jacobian products. One tape per thread.
    """

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        if _active_tape() is not None:
            raise RuntimeError("a tape is already active in this thread")
        _STATE.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _STATE.tape = None
        return False

    def __len__(self):
        return len(self._nodes)

    def gradients(self, output, wrt):
        """Gradients of ``output`` w.r.t. every tensor in ``wrt``.

        Returns a list of arrays aligned with ``wrt`` (zeros when an input
        never influenced the output); also stores each on ``tensor.grad``.
        """
        wrt = list(wrt)
        grads = {id(output): np.ones_like(output.data)}
        stored = {id(grads[id(output)])}
        for out, inputs, vjp in reversed(self._nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            stored.discard(id(g))
            for inp, contrib in zip(inputs, vjp(g)):
                if contrib is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    fresh = grads[key] + contrib
                    stored.discard(id(grads[key]))
                    grads[key] = fresh
                    stored.add(id(fresh))
                else:
                    if id(contrib) in stored:
                        contrib = contrib.copy()
                    grads[key] = contrib
                    stored.add(id(contrib))
        result = []
        for t in wrt:
            g = grads.get(id(t))
            if g is None:
                g = np.zeros_like(t.data)
            t.grad = g
            result.append(g)
        return result


def _record(out, inputs, vjp):
    tape = _active_tape()
    if tape is not None and any(i.requires_grad for i in inputs):
        out.requires_grad = True
        tape._nodes.append((out, inputs, vjp))
    return out


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy batch broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, (have, want) in enumerate(zip(grad.shape, shape)):
        if want == 1 and have != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def matmul(a, b):
    """Matrix product with numpy batch broadcasting on leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must have rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    try:
        data = a.data @ b.data
    except ValueError as e:
        raise DimensionError(f"matmul batch shapes incompatible: {e}") from e
    out = Tensor(data)

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _record(out, (a, b), vjp)


def _binary_pattern(sa, sb):
    """Validate elementwise shapes: equal, (1,n)-row or (m,1)-column."""
    if sa == sb:
        return
    if len(sa) == 2 and len(sb) == 2:
        if sb == (1, sa[1]) or sb == (sa[0], 1):
            return
        if sa == (1, sb[1]) or sa == (sb[0], 1):
            return
    raise DimensionError(f"elementwise shapes incompatible: {sa} vs {sb}")


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _binary_pattern(a.shape, b.shape)
    out = Tensor(a.data + b.data)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), vjp)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _binary_pattern(a.shape, b.shape)
    out = Tensor(a.data - b.data)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(out, (a, b), vjp)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _binary_pattern(a.shape, b.shape)
    out = Tensor(a.data * b.data)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return _record(out, (a, b), vjp)


def scale(x, c):
    """Multiply by a python scalar constant."""
    x = as_tensor(x)
    c = float(c)
    out = Tensor(x.data * c)

    def vjp(g):
        return (g * c,)

    return _record(out, (x,), vjp)


def _unary(x, fwd, make_vjp):
    x = as_tensor(x)
    flat = x.data.ravel()
    y = fwd(flat).reshape(x.shape)
    out = Tensor(y)
    return _record(out, (x,), make_vjp(flat, y, x.shape))


def relu(x):
    """Pointwise max(x, 0); the subgradient at 0 is 0."""
    def make(flat, y, shape):
        def vjp(g):
            return (kernels.relu_bwd(flat, np.ascontiguousarray(g).ravel()).reshape(shape),)
        return vjp
    return _unary(x, kernels.relu_fwd, make)


def sigmoid(x):
    def make(flat, y, shape):
        yflat = y.ravel()

        def vjp(g):
            return (kernels.sigmoid_bwd(yflat, np.ascontiguousarray(g).ravel()).reshape(shape),)
        return vjp
    return _unary(x, kernels.sigmoid_fwd, make)


def tanh(x):
    def make(flat, y, shape):
        yflat = y.ravel()

        def vjp(g):
            return (kernels.tanh_bwd(yflat, np.ascontiguousarray(g).ravel()).reshape(shape),)
        return vjp
    return _unary(x, kernels.tanh_fwd, make)


def absval(x):
    """Pointwise absolute value; the subgradient at 0 is 0."""
    def make(flat, y, shape):
        def vjp(g):
            return (kernels.abs_bwd(flat, np.ascontiguousarray(g).ravel()).reshape(shape),)
        return vjp
    return _unary(x, kernels.abs_fwd, make)


def log_clamped(x, eps=1e-12):
    """log(max(x, eps)); entries below eps are constants with zero gradient."""
    x = as_tensor(x)
    flat = x.data.ravel()
    y = kernels.log_clamped_fwd(flat, eps).reshape(x.shape)
    out = Tensor(y)

    def vjp(g):
        return (kernels.log_clamped_bwd(flat, np.ascontiguousarray(g).ravel(), eps).reshape(x.shape),)

    return _record(out, (x,), vjp)


def softmax_rows(x):
    """Row-wise softmax of a matrix, stabilized by row-max subtraction."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows expects a matrix, got shape {x.shape}")
    y = kernels.softmax_rows_fwd(x.data)
    out = Tensor(y)

    def vjp(g):
        return (kernels.softmax_rows_bwd(y, np.ascontiguousarray(g)),)

    return _record(out, (x,), vjp)


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = np.argsort(axes)
    out = Tensor(np.ascontiguousarray(np.transpose(x.data, axes)))

    def vjp(g):
        return (np.ascontiguousarray(np.transpose(g, inverse)),)

    return _record(out, (x,), vjp)


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    out = Tensor(x.data.reshape(shape))

    def vjp(g):
        return (g.reshape(old),)

    return _record(out, (x,), vjp)


def reduce_sum(x, axis=None):
    """Sum over one axis, or over everything (axis=None -> scalar)."""
    x = as_tensor(x)
    out = Tensor(x.data.sum(axis=axis))
    shape = x.shape

    def vjp(g):
        if axis is None:
            return (np.full(shape, float(g), dtype=x.data.dtype),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _record(out, (x,), vjp)


def mean_frames(x):
    """Average over the leading (time) axis."""
    x = as_tensor(x)
    return scale(reduce_sum(x, axis=0), 1.0 / x.shape[0])


def frame_diff(x):
    """Backward difference along the leading axis with the first frame zeroed.

    out[0] = 0, out[t] = x[t] - x[t-1] for t >= 1.
    """
    x = as_tensor(x)
    data = np.zeros_like(x.data)
    data[1:] = x.data[1:] - x.data[:-1]
    out = Tensor(data)

    def vjp(g):
        dx = np.zeros_like(g)
        dx[1:] = g[1:]
        dx[:-1] -= g[1:]
        return (dx,)

    return _record(out, (x,), vjp)


def concat(xs, axis):
    """Concatenate tensors along an existing axis."""
    xs = [as_tensor(x) for x in xs]
    out = Tensor(np.concatenate([x.data for x in xs], axis=axis))
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return _record(out, tuple(xs), vjp)


def stack_frames(frames):
    """Stack rank-k tensors into one rank-(k+1) tensor along a new axis 0."""
    return concat([reshape(f, (1,) + as_tensor(f).shape) for f in frames], axis=0)


def frame(x, index):
    """Select one index along the leading axis."""
    x = as_tensor(x)
    if not 0 <= index < x.shape[0]:
        raise DimensionError(f"frame index {index} out of range for shape {x.shape}")
    out = Tensor(x.data[index])

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[index] = g
        return (dx,)

    return _record(out, (x,), vjp)


def hop_mix(shifts, weights):
    """Fused hop-summed channel mixing: sum_h shifts[h] @ weights[h].

    shifts: H tensors of shape (T, M, D); weights: one (H, D, E) tensor.
    One tape node covering the whole sum, so the backward pass never
    materializes per-hop weight-slice scatters.
    """
    shifts = [as_tensor(s) for s in shifts]
    weights = as_tensor(weights)
    if weights.ndim != 3:
        raise DimensionError(f"hop weights must be rank 3, got shape {weights.shape}")
    if len(shifts) != weights.shape[0]:
        raise DimensionError(
            f"{len(shifts)} shift tensors for {weights.shape[0]} hop slices"
        )
    first = shifts[0].shape
    for s in shifts:
        if s.shape != first:
            raise DimensionError(f"shift shapes differ: {s.shape} vs {first}")
    if first[-1] != weights.shape[1]:
        raise DimensionError(
            f"shift feature dim {first[-1]} vs weight rows {weights.shape[1]}"
        )
    frames, rows, dim = first
    taps, _, out_dim = weights.shape
    # (T, M, H, D) layout so both GEMM operands reshape without copies
    stacked = np.stack([s.data for s in shifts], axis=2)
    flat = stacked.reshape(frames * rows, taps * dim)
    w_flat = weights.data.reshape(taps * dim, out_dim)
    out = Tensor((flat @ w_flat).reshape(frames, rows, out_dim))

    def vjp(g):
        g2 = np.ascontiguousarray(g).reshape(frames * rows, out_dim)
        dw = (flat.T @ g2).reshape(weights.shape)
        ds = (g2 @ w_flat.T).reshape(frames, rows, taps, dim)
        return tuple(
            np.ascontiguousarray(ds[:, :, h, :]) for h in range(taps)
        ) + (dw,)

    return _record(out, tuple(shifts) + (weights,), vjp)


def merge_time_channels(x):
    """Reshape (T, M, d) -> (M, d*T) with out[m, t*d + c] = in[t, m, c]."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise DimensionError(f"merge_time_channels expects rank 3, got shape {x.shape}")
    t, m, d = x.shape
    return reshape(transpose(x, (1, 0, 2)), (m, t * d))


def split_time_channels(y, frames, channels):
    """Inverse of :func:`merge_time_channels` given the original T and d."""
    y = as_tensor(y)
    if y.ndim != 2 or y.shape[1] != frames * channels:
        raise DimensionError(
            f"split_time_channels: shape {y.shape} does not factor into T={frames}, d={channels}"
        )
    m = y.shape[0]
    return transpose(reshape(y, (m, frames, channels)), (1, 0, 2))
