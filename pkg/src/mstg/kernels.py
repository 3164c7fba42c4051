"""Low-level numeric kernels behind the tensor primitives.

Every kernel exists twice: a pure-numpy version and a numba ``@njit`` version
with the hot loops fused into one pass. The active backend is chosen once at
import time from the ``MSTG_BACKEND`` environment variable:

    MSTG_BACKEND=numba   force the jitted kernels (error if numba is missing)
    MSTG_BACKEND=numpy   force the pure-numpy fallback
    MSTG_BACKEND=auto    (default) numba when importable, else numpy

Both backends compute the same functions; they may differ by a few ULPs where
libm implementations differ. ``benchmarks/bench_kernels.py`` compares their
throughput on representative shapes.

Elementwise kernels take and return 1-D float arrays (callers ravel); softmax
kernels take 2-D arrays; the Adam kernel updates its buffers in place.
"""

import math
import os
from types import SimpleNamespace

import numpy as np


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_relu_fwd(x):
    return np.maximum(x, 0.0)


def _np_relu_bwd(x, g):
    return np.where(x > 0.0, g, 0.0)


def _np_sigmoid_fwd(x):
    # split on sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _np_sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def _np_tanh_fwd(x):
    return np.tanh(x)


def _np_tanh_bwd(y, g):
    return g * (1.0 - y * y)


def _np_abs_fwd(x):
    return np.abs(x)


def _np_abs_bwd(x, g):
    # subgradient at 0 fixed to 0
    return g * np.sign(x)


def _np_log_clamped_fwd(x, eps):
    return np.log(np.maximum(x, eps))


def _np_log_clamped_bwd(x, g, eps):
    # entries in the clamp region are constants, so their gradient is 0
    return np.where(x >= eps, g / np.maximum(x, eps), 0.0)


def _np_softmax_rows_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _np_softmax_rows_bwd(y, g):
    dot = (y * g).sum(axis=1, keepdims=True)
    return y * (g - dot)


def _np_adam_update(p, g, m, v, lr, beta1, beta2, eps, step, scale):
    gs = g if scale == 1.0 else g * scale
    m *= beta1
    m += (1.0 - beta1) * gs
    v *= beta2
    v += (1.0 - beta2) * gs * gs
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _np_sumsq(x):
    return float(np.dot(x, x))


_NUMPY = SimpleNamespace(
    name="numpy",
    relu_fwd=_np_relu_fwd,
    relu_bwd=_np_relu_bwd,
    sigmoid_fwd=_np_sigmoid_fwd,
    sigmoid_bwd=_np_sigmoid_bwd,
    tanh_fwd=_np_tanh_fwd,
    tanh_bwd=_np_tanh_bwd,
    abs_fwd=_np_abs_fwd,
    abs_bwd=_np_abs_bwd,
    log_clamped_fwd=_np_log_clamped_fwd,
    log_clamped_bwd=_np_log_clamped_bwd,
    softmax_rows_fwd=_np_softmax_rows_fwd,
    softmax_rows_bwd=_np_softmax_rows_bwd,
    adam_update=_np_adam_update,
    sumsq=_np_sumsq,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_backend():
    from numba import njit

    @njit(cache=True)
    def relu_fwd(x):
        out = np.empty_like(x)
        for i in range(x.size):
            v = x[i]
            out[i] = v if v > 0.0 else 0.0
        return out

    @njit(cache=True)
    def relu_bwd(x, g):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = g[i] if x[i] > 0.0 else 0.0
        return out

    @njit(cache=True)
    def sigmoid_fwd(x):
        out = np.empty_like(x)
        for i in range(x.size):
            v = x[i]
            if v >= 0.0:
                out[i] = 1.0 / (1.0 + math.exp(-v))
            else:
                e = math.exp(v)
                out[i] = e / (1.0 + e)
        return out

    @njit(cache=True)
    def sigmoid_bwd(y, g):
        out = np.empty_like(y)
        for i in range(y.size):
            out[i] = g[i] * y[i] * (1.0 - y[i])
        return out

    @njit(cache=True)
    def tanh_fwd(x):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = math.tanh(x[i])
        return out

    @njit(cache=True)
    def tanh_bwd(y, g):
        out = np.empty_like(y)
        for i in range(y.size):
            out[i] = g[i] * (1.0 - y[i] * y[i])
        return out

    @njit(cache=True)
    def abs_fwd(x):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = abs(x[i])
        return out

    @njit(cache=True)
    def abs_bwd(x, g):
        out = np.empty_like(x)
        for i in range(x.size):
            if x[i] > 0.0:
                out[i] = g[i]
            elif x[i] < 0.0:
                out[i] = -g[i]
            else:
                out[i] = 0.0
        return out

    @njit(cache=True)
    def log_clamped_fwd(x, eps):
        out = np.empty_like(x)
        for i in range(x.size):
            v = x[i]
            out[i] = math.log(v if v > eps else eps)
        return out

    @njit(cache=True)
    def log_clamped_bwd(x, g, eps):
        out = np.empty_like(x)
        for i in range(x.size):
            out[i] = g[i] / x[i] if x[i] >= eps else 0.0
        return out

    @njit(cache=True)
    def softmax_rows_fwd(x):
        rows, cols = x.shape
        out = np.empty_like(x)
        for i in range(rows):
            mx = x[i, 0]
            for j in range(1, cols):
                if x[i, j] > mx:
                    mx = x[i, j]
            total = 0.0
            for j in range(cols):
                e = math.exp(x[i, j] - mx)
                out[i, j] = e
                total += e
            for j in range(cols):
                out[i, j] /= total
        return out

    @njit(cache=True)
    def softmax_rows_bwd(y, g):
        rows, cols = y.shape
        out = np.empty_like(y)
        for i in range(rows):
            dot = 0.0
            for j in range(cols):
                dot += y[i, j] * g[i, j]
            for j in range(cols):
                out[i, j] = y[i, j] * (g[i, j] - dot)
        return out

    @njit(cache=True)
    def adam_update(p, g, m, v, lr, beta1, beta2, eps, step, scale):
        lr_bc1 = lr / (1.0 - beta1 ** step)
        inv_bc2 = 1.0 / (1.0 - beta2 ** step)
        for i in range(p.size):
            gi = g[i] * scale
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
            p[i] -= lr_bc1 * m[i] / (math.sqrt(v[i] * inv_bc2) + eps)

    @njit(cache=True)
    def sumsq(x):
        total = 0.0
        for i in range(x.size):
            total += x[i] * x[i]
        return total

    return SimpleNamespace(
        name="numba",
        relu_fwd=relu_fwd,
        relu_bwd=relu_bwd,
        sigmoid_fwd=sigmoid_fwd,
        sigmoid_bwd=sigmoid_bwd,
        tanh_fwd=tanh_fwd,
        tanh_bwd=tanh_bwd,
        abs_fwd=abs_fwd,
        abs_bwd=abs_bwd,
        log_clamped_fwd=log_clamped_fwd,
        log_clamped_bwd=log_clamped_bwd,
        softmax_rows_fwd=softmax_rows_fwd,
        softmax_rows_bwd=softmax_rows_bwd,
        adam_update=adam_update,
        sumsq=sumsq,
    )


_numba_backend = None


def get_backend(name):
    """Return the kernel namespace for ``name`` ("numpy" or "numba")."""
    global _numba_backend
    if name == "numpy":
        return _NUMPY
    if name == "numba":
        if _numba_backend is None:
            _numba_backend = _build_numba_backend()
        return _numba_backend
    raise ValueError(f"unknown kernel backend {name!r}")


def _select_active():
    choice = os.environ.get("MSTG_BACKEND", "auto").lower()
    if choice == "numpy":
        return _NUMPY
    if choice == "numba":
        return get_backend("numba")
    if choice == "auto":
        try:
            return get_backend("numba")
        except ImportError:
            return _NUMPY
    raise ValueError(
        f"MSTG_BACKEND must be 'auto', 'numba' or 'numpy', got {choice!r}"
    )


active = _select_active()
BACKEND = active.name

relu_fwd = active.relu_fwd
relu_bwd = active.relu_bwd
sigmoid_fwd = active.sigmoid_fwd
sigmoid_bwd = active.sigmoid_bwd
tanh_fwd = active.tanh_fwd
tanh_bwd = active.tanh_bwd
abs_fwd = active.abs_fwd
abs_bwd = active.abs_bwd
log_clamped_fwd = active.log_clamped_fwd
log_clamped_bwd = active.log_clamped_bwd
softmax_rows_fwd = active.softmax_rows_fwd
softmax_rows_bwd = active.softmax_rows_bwd
adam_update = active.adam_update
sumsq = active.sumsq
