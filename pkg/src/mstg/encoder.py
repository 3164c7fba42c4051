"""Observed motion -> per-joint state matrix.

Pipeline: difference features (position, velocity, acceleration channels) ->
one plain spatial graph convolution -> a stack of multiscale units -> global
average pooling over time, yielding one state row per joint.
"""

from dataclasses import dataclass, field

import numpy as np

from .block import MultiscaleBlock
from .convolution import spatial_graph_conv
from .graphs import init_spatial
from .init import uniform_param
from .tensor import (
    DimensionError,
    NonFiniteError,
    as_tensor,
    concat,
    frame_diff,
    mean_frames,
)


@dataclass
class EncoderAux:
    pool_ops: list = field(default_factory=list)
    unpool_ops: list = field(default_factory=list)
    blocks: list = field(default_factory=list)  # per-block BlockAux, in stack order


def diff_features(x, order):
    """Concatenate discrete differences 0..order along the channel axis.

    For each level b >= 1, frame 0 is zero and frame t holds the backward
    difference of level b-1; (T, M, C) becomes (T, M, C*(order+1)).
    """
    if order < 0:
        raise ValueError(f"difference order must be >= 0, got {order}")
    x = as_tensor(x)
    if order == 0:
        return x
    feats = [x]
    level = x
    for _ in range(order):
        level = frame_diff(level)
        feats.append(level)
    return concat(feats, axis=x.ndim - 1)


class Encoder:
    def __init__(self, rng, skeleton, frames, diff_order, layer_dims, scales,
                 spatial_hops=1, temporal_hops=4, infer_hops=1, embed_dim=0,
                 conv_order="spatial_first", dtype="float64"):
        if frames < diff_order + 1:
            raise ValueError(
                f"need at least {diff_order + 1} observed frames for order-{diff_order} "
                f"differences, got {frames}"
            )
        self.frames = frames
        self.diff_order = diff_order
        self.channels = skeleton.channels
        self.state_dim = layer_dims[-1]
        self._params = {}

        np_dtype = np.float32 if dtype == "float32" else np.float64
        in_channels = skeleton.channels * (diff_order + 1)
        self.input_graph = init_spatial(skeleton, "encoder.input_adj")
        self.input_graph.adjacency.data = self.input_graph.adjacency.data.astype(np_dtype)
        self.input_weights = uniform_param(
            rng, (2, in_channels, layer_dims[0]), 2 * in_channels,
            "encoder.input_conv", np_dtype,
        )
        self._params["encoder.input_adj"] = self.input_graph.adjacency
        self._params[self.input_weights.name] = self.input_weights

        self.blocks = []
        prev = layer_dims[0]
        for i, dim in enumerate(layer_dims):
            block = MultiscaleBlock(
                rng, skeleton, frames, prev, dim, scales,
                spatial_hops=spatial_hops, temporal_hops=temporal_hops,
                infer_hops=infer_hops, embed_dim=embed_dim, conv_order=conv_order,
                name=f"encoder.block{i}", dtype=dtype,
            )
            self.blocks.append(block)
            self._params.update(block.params())
            prev = dim

    def params(self):
        return dict(self._params)

    def graph_params(self):
        out = [self.input_graph.adjacency]
        for b in self.blocks:
            out.extend(b.graph_params())
        return out

    def zero_masks(self):
        out = []
        for b in self.blocks:
            out.extend(b.zero_masks())
        return out

    def forward(self, x):
        """(T, M, C) observed motion -> ((M, state_dim) state, EncoderAux)."""
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[0] != self.frames or x.shape[2] != self.channels:
            raise DimensionError(
                f"encoder expects ({self.frames}, M, {self.channels}), got {x.shape}"
            )
        aux = EncoderAux()
        try:
            h = spatial_graph_conv(
                diff_features(x, self.diff_order),
                self.input_graph.adjacency,
                self.input_weights,
            )
        except (DimensionError, NonFiniteError) as e:
            raise type(e)(f"encoder.input: {e}") from e
        for block in self.blocks:
            h, block_aux = block.forward(h)
            aux.pool_ops.extend(block_aux.pool_ops)
            aux.unpool_ops.extend(block_aux.unpool_ops)
            aux.blocks.append(block_aux)
        return mean_frames(h), aux
