"""Parameter initialization helpers."""

import numpy as np

from .tensor import parameter


def uniform_param(rng, shape, fan_in, name, dtype=np.float64):
    """Uniform(-b, b) weights with b = 1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return parameter(rng.uniform(-bound, bound, size=shape).astype(dtype), name)


def zeros_param(shape, name, dtype=np.float64):
    return parameter(np.zeros(shape, dtype=dtype), name)
