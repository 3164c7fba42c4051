"""One multiscale spatio-temporal unit: construct coarse scales, convolve at
every scale, fuse back to the joint scale, then add the residual.

The spatial stage and temporal stage run strictly in sequence (order set by
``conv_order``); the second stage consumes the fused output of the first.
Each unit owns all of its parameters, including its own spatial and temporal
adjacency matrices, so stacked units can learn different relations.
"""

from dataclasses import dataclass, field

import numpy as np

from .convolution import ss_gc, st_gc
from .graphs import init_spatial, init_temporal_cyclic
from .init import uniform_param
from .pooling import (
    ScaleSpec,
    SpatialPoolParams,
    UnpoolParams,
    cross_scale_spatial_fuse,
    cross_scale_temporal_fuse,
    downscale_spatial,
    downscale_temporal,
    spatial_pool_operator,
    spatial_unpool_operator,
    temporal_pool_operator,
)
from .tensor import DimensionError, NonFiniteError, add, matmul


# damping on the hop-filter init bounds; the cross-scale fusions are additive
# over scales and the raw adjacency amplifies by vertex degree, so undamped
# init inflates activations block over block until gates and softmaxes saturate
HOP_WEIGHT_GAIN = 0.7


@dataclass
class BlockAux:
    """Input-conditioned operators produced during one forward pass."""

    pool_ops: list = field(default_factory=list)     # joint -> group assignments
    unpool_ops: list = field(default_factory=list)   # group -> joint mappings
    coarse_graphs: list = field(default_factory=list)  # coarsened spatial adjacencies


class MultiscaleBlock:
    def __init__(self, rng, skeleton, frames, in_dim, out_dim, scales,
                 spatial_hops=1, temporal_hops=4, infer_hops=1, embed_dim=0,
                 conv_order="spatial_first", name="block", dtype="float64"):
        if conv_order not in ("spatial_first", "temporal_first"):
            raise ValueError(f"unknown conv_order {conv_order!r}")
        self.name = name
        self.frames = frames
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.scales = scales
        self.conv_order = conv_order
        self._params = {}
        self.dtype = dtype

        self.spatial_graph = init_spatial(skeleton, f"{name}.spatial_adj")
        self.temporal_graph = init_temporal_cyclic(frames, f"{name}.temporal_adj")
        np_dtype = self._np_dtype()
        self.spatial_graph.adjacency.data = self.spatial_graph.adjacency.data.astype(np_dtype)
        self.temporal_graph.adjacency.data = self.temporal_graph.adjacency.data.astype(np_dtype)
        self._params[f"{name}.spatial_adj"] = self.spatial_graph.adjacency
        self._params[f"{name}.temporal_adj"] = self.temporal_graph.adjacency

        # the first stage maps in_dim -> out_dim, the second stays at out_dim
        if conv_order == "spatial_first":
            s_in, t_in = in_dim, out_dim
        else:
            s_in, t_in = out_dim, in_dim
        embed = embed_dim if embed_dim > 0 else out_dim
        t_taps = 2 * temporal_hops + 1
        i_taps = 2 * infer_hops + 1

        def par(shape, fan_in, local, gain=1.0):
            p = uniform_param(
                rng, shape, fan_in / gain ** 2, f"{name}.{local}", self._np_dtype()
            )
            self._params[p.name] = p
            return p

        g = HOP_WEIGHT_GAIN
        self.ss_weights = [
            par((spatial_hops + 1, s_in, out_dim), (spatial_hops + 1) * s_in, f"ss{r}", g)
            for r in range(len(scales.spatial_counts))
        ]
        self.pool = [
            SpatialPoolParams(
                hop_weights=par((i_taps, s_in, s_in), i_taps * s_in, f"pool{r}.hop", g),
                assign_weights=par(
                    (s_in * frames, scales.spatial_counts[r]), s_in * frames,
                    f"pool{r}.assign",
                ),
            )
            for r in range(1, len(scales.spatial_counts))
        ]
        self.unpool = [
            UnpoolParams(
                fine_hop_weights=par((i_taps, out_dim, out_dim), i_taps * out_dim, f"unpool{r}.fine_hop", g),
                coarse_hop_weights=par((i_taps, out_dim, out_dim), i_taps * out_dim, f"unpool{r}.coarse_hop", g),
                fine_embed=par((out_dim * frames, embed), out_dim * frames, f"unpool{r}.fine_embed"),
                coarse_embed=par((out_dim * frames, embed), out_dim * frames, f"unpool{r}.coarse_embed"),
                fuse_weights=par((out_dim, out_dim), out_dim, f"unpool{r}.fuse", g),
            )
            for r in range(1, len(scales.spatial_counts))
        ]
        self.st_weights = [
            par((t_taps, t_in, out_dim), t_taps * t_in, f"st{r}", g)
            for r in range(len(scales.temporal_divisors))
        ]
        self.residual = (
            par((in_dim, out_dim), in_dim, "residual") if in_dim != out_dim else None
        )

    def _np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def params(self):
        return dict(self._params)

    def graph_params(self):
        return [self.spatial_graph.adjacency, self.temporal_graph.adjacency]

    def zero_masks(self):
        return [(self.temporal_graph.adjacency, self.temporal_graph.zero_mask)]

    def forward(self, x):
        """(T, M, in_dim) -> ((T, M, out_dim), BlockAux)."""
        if x.ndim != 3 or x.shape[0] != self.frames or x.shape[2] != self.in_dim:
            raise DimensionError(
                f"{self.name}: expected ({self.frames}, M, {self.in_dim}), got {x.shape}"
            )
        aux = BlockAux()
        try:
            if self.conv_order == "spatial_first":
                h = self._temporal_stage(self._spatial_stage(x, aux), aux)
            else:
                h = self._spatial_stage(self._temporal_stage(x, aux), aux)
        except (DimensionError, NonFiniteError) as e:
            raise type(e)(f"{self.name}: {e}") from e
        res = x if self.residual is None else matmul(x, self.residual)
        return add(h, res), aux

    def _spatial_stage(self, x, aux):
        adj = self.spatial_graph.adjacency
        t_adj = self.temporal_graph.adjacency
        base = ss_gc(x, adj, self.ss_weights[0])
        coarse = []
        for r in range(1, len(self.scales.spatial_counts)):
            assign = spatial_pool_operator(x, adj, t_adj, self.pool[r - 1])
            aux.pool_ops.append(assign)
            x_r, s_r = downscale_spatial(x, adj, assign)
            aux.coarse_graphs.append(s_r)
            h_r = ss_gc(x_r, s_r, self.ss_weights[r])
            mapping = spatial_unpool_operator(base, h_r, adj, s_r, t_adj, self.unpool[r - 1])
            aux.unpool_ops.append(mapping)
            coarse.append((h_r, mapping, self.unpool[r - 1].fuse_weights))
        return cross_scale_spatial_fuse(base, coarse)

    def _temporal_stage(self, x, aux):
        t_adj = self.temporal_graph.adjacency
        base = st_gc(x, t_adj, self.st_weights[0])
        coarse = []
        for r in range(1, len(self.scales.temporal_divisors)):
            length = self.scales.coarse_length(self.frames, r)
            pool = temporal_pool_operator(self.frames, length)
            x_r, t_r = downscale_temporal(x, t_adj, pool)
            coarse.append(st_gc(x_r, t_r, self.st_weights[r]))
        return cross_scale_temporal_fuse(base, coarse)
