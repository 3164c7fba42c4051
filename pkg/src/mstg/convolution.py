"""Spatial and temporal graph convolutions and their single-scale forms.

The spatial convolution filters each frame independently with hop-summed
graph shifts; the temporal convolution filters each joint's trajectory with
both forward and backward shifts (negative hops use the transposed graph).
Neither carries a bias term. The single-scale forms wrap the result in ReLU.
"""

import numpy as np

from .graphs import SpatialGraph, TemporalGraph, cartesian_product
from .tensor import DimensionError, Tensor, hop_mix, matmul, relu, reshape, transpose


def _adj(g):
    if isinstance(g, (SpatialGraph, TemporalGraph)):
        return g.adjacency
    return g


def spatial_graph_conv(x, spatial, weights):
    """Hop-summed spatial filtering, frames independent.

    x: (T, M, D); weights: (L+1, D, D'), one slice per hop 0..L.
    Output (T, M, D') where each frame t is sum_l A^l x[t] W[l].
    """
    adj = _adj(spatial)
    if weights.ndim != 3:
        raise DimensionError(f"spatial conv weights must be rank 3, got {weights.shape}")
    hops = weights.shape[0] - 1
    shifts = [x]
    for _ in range(hops):
        shifts.append(matmul(adj, shifts[-1]))
    return hop_mix(shifts, weights)


def temporal_graph_conv(x, temporal, weights):
    """Hop-summed temporal filtering, joints independent.

    x: (T, M, D); weights: (2L+1, D, D'), slice L+l for hop l in -L..L.
    Negative hops shift with the transposed graph.
    """
    adj = _adj(temporal)
    if weights.ndim != 3 or weights.shape[0] % 2 == 0:
        raise DimensionError(
            f"temporal conv weights must be rank 3 with an odd hop count, got {weights.shape}"
        )
    hops = (weights.shape[0] - 1) // 2
    frames, joints, dim = x.shape
    # shift in (T, M*D) layout: one GEMM per hop, reshape back is a view
    flat = reshape(x, (frames, joints * dim))
    shifts_flat = [None] * (2 * hops + 1)
    shifts_flat[hops] = flat
    if hops > 0:
        back = transpose(adj)
        fwd_shift = flat
        bwd_shift = flat
        for level in range(1, hops + 1):
            fwd_shift = matmul(adj, fwd_shift)
            shifts_flat[hops + level] = fwd_shift
            bwd_shift = matmul(back, bwd_shift)
            shifts_flat[hops - level] = bwd_shift
    shifts = [reshape(s, (frames, joints, dim)) for s in shifts_flat]
    return hop_mix(shifts, weights)


def ss_gc(x, spatial, weights):
    """Single-scale spatial graph convolution: ReLU of the spatial filter."""
    return relu(spatial_graph_conv(x, spatial, weights))


def st_gc(x, temporal, weights):
    """Single-scale temporal graph convolution: ReLU of the temporal filter."""
    return relu(temporal_graph_conv(x, temporal, weights))


def decomposition_equivalence_check(x, spatial, temporal):
    """Max abs deviation between the product-graph shift and split shifts.

    One shift of vec(x) on the Kronecker-sum graph must equal one spatial
    shift plus one temporal shift applied to the rank-3 tensor. Pure numpy
    oracle; not part of the training path.
    """
    x = np.asarray(x, dtype=np.float64)
    s = _adj(spatial)
    t = _adj(temporal)
    s = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
    t = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    frames, joints, dim = x.shape
    product = cartesian_product(s, t)
    joint_shift = (product @ x.reshape(frames * joints, dim)).reshape(x.shape)
    split_shift = np.einsum("ij,tjd->tid", s, x) + np.einsum("ij,jmd->imd", t, x)
    return float(np.abs(joint_shift - split_shift).max())
