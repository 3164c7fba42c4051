"""Multiscale construction: graph pooling, unpooling and cross-scale fusion.

Spatial coarsening is learned: an input-conditioned row-stochastic assignment
matrix maps joints to joint groups, and a second input-conditioned operator
maps group features back for fusion. Temporal coarsening is a fixed
block-averaging matrix; going back up duplicates each coarse frame over its
group of fine frames. Every coarse scale is derived from scale 0 directly,
never from the previous coarse scale.

Sequence lengths that do not divide evenly are trimmed: a coarse length of
``T_r`` uses the first ``(T // T_r) * T_r`` frames, and the fused result is
zero beyond them.
"""

from dataclasses import dataclass

import numpy as np

from .convolution import temporal_graph_conv
from .tensor import (
    DimensionError,
    Tensor,
    add,
    matmul,
    merge_time_channels,
    relu,
    reshape,
    softmax_rows,
    transpose,
)


@dataclass(frozen=True)
class ScaleSpec:
    """Vertex counts per spatial scale and frame divisors per temporal scale.

    Scale 0 is always the original resolution. Defaults follow the halving
    rule for joints (M, ceil(M/2), ceil(M/4), ...) and unit-fraction lengths
    (T, T/2, T/3, ...) for frames.
    """

    spatial_counts: tuple
    temporal_divisors: tuple

    def __post_init__(self):
        if not self.spatial_counts or not self.temporal_divisors:
            raise ValueError("need at least one scale in each domain")
        if any(b >= a for a, b in zip(self.spatial_counts, self.spatial_counts[1:])):
            raise ValueError(f"spatial counts must strictly decrease: {self.spatial_counts}")
        if self.temporal_divisors[0] != 1:
            raise ValueError("temporal scale 0 must keep the original length")
        if any(b <= a for a, b in zip(self.temporal_divisors, self.temporal_divisors[1:])):
            raise ValueError(f"temporal divisors must strictly increase: {self.temporal_divisors}")

    @staticmethod
    def default(joints, spatial_scales, temporal_scales):
        counts = []
        for r in range(spatial_scales):
            c = -(-joints // (2 ** r))  # ceil division
            if counts and c >= counts[-1]:
                raise ValueError(
                    f"{joints} joints cannot support {spatial_scales} strictly shrinking scales"
                )
            counts.append(c)
        return ScaleSpec(tuple(counts), tuple(range(1, temporal_scales + 1)))

    def coarse_length(self, frames, scale):
        length = frames // self.temporal_divisors[scale]
        if length < 1:
            raise ValueError(
                f"{frames} frames are too few for temporal divisor "
                f"{self.temporal_divisors[scale]}"
            )
        return length


@dataclass
class SpatialPoolParams:
    """Weights of one learned joint-to-group assignment (one per layer/scale)."""

    hop_weights: Tensor     # (2L+1, D, D) temporal filter inside the inference
    assign_weights: Tensor  # (D*T, M_r)


@dataclass
class UnpoolParams:
    """Weights of one group-to-joint mapping and its fusion projection."""

    fine_hop_weights: Tensor    # (2L+1, D', D')
    coarse_hop_weights: Tensor  # (2L+1, D', D')
    fine_embed: Tensor          # (D'*T, E)
    coarse_embed: Tensor        # (D'*T, E)
    fuse_weights: Tensor        # (D', D')


def spatial_pool_operator(x, spatial_adj, temporal_adj, params):
    """Learned row-stochastic assignment of joints to coarse groups.

    Softmax rows of A (dot) merged ReLU temporal features (dot) the assignment
    weights; shape (M, M_r), each row sums to 1.
    """
    feats = merge_time_channels(relu(temporal_graph_conv(x, temporal_adj, params.hop_weights)))
    if feats.shape[1] != params.assign_weights.shape[0]:
        raise DimensionError(
            f"assignment weights expect {params.assign_weights.shape[0]} features, "
            f"got {feats.shape[1]}"
        )
    return softmax_rows(matmul(matmul(spatial_adj, feats), params.assign_weights))


def downscale_spatial(x, spatial_adj, assign):
    """Coarse features and coarse adjacency from a row-stochastic assignment.

    x_r[t] = assign^T x[t] per frame; S_r = assign^T S assign.
    """
    assign_t = transpose(assign)
    x_r = matmul(assign_t, x)
    s_r = matmul(matmul(assign_t, spatial_adj), assign)
    return x_r, s_r


def temporal_pool_operator(frames, coarse_frames):
    """Fixed block-averaging matrix (T, T_r); every column sums to 1.

    Entry (i, j) is 1/k for the k = T // T_r frames of group j, zero
    elsewhere; trailing frames beyond k*T_r are trimmed (all-zero rows).
    """
    if coarse_frames > frames:
        raise DimensionError(
            f"coarse length {coarse_frames} exceeds sequence length {frames}"
        )
    if coarse_frames < 1:
        raise DimensionError("coarse length must be at least 1")
    group = frames // coarse_frames
    phi = np.zeros((frames, coarse_frames))
    for j in range(coarse_frames):
        phi[j * group:(j + 1) * group, j] = 1.0 / group
    return Tensor(phi)


def downscale_temporal(x, temporal_adj, pool):
    """Coarse features and coarse temporal adjacency from the averaging matrix.

    x_r[:, s] = pool^T x[:, s] per joint; T_r = pool^T T pool.
    """
    pool_t = transpose(pool)
    joints_major = transpose(x, (1, 0, 2))
    x_r = transpose(matmul(pool_t, joints_major), (1, 0, 2))
    t_r = matmul(matmul(pool_t, temporal_adj), pool)
    return x_r, t_r


def spatial_unpool_operator(x_fine, x_coarse, fine_adj, coarse_adj, temporal_adj, params):
    """Input-conditioned row-stochastic map from coarse groups back to joints.

    Both scales are embedded with their own temporal filter, graph shift and
    projection; row-softmaxed inner products between the fine and coarse
    embeddings give the (M, M_r) mapping, normalized over the coarse groups.
    """
    fine = matmul(
        matmul(
            fine_adj,
            merge_time_channels(
                relu(temporal_graph_conv(x_fine, temporal_adj, params.fine_hop_weights))
            ),
        ),
        params.fine_embed,
    )
    coarse = matmul(
        matmul(
            coarse_adj,
            merge_time_channels(
                relu(temporal_graph_conv(x_coarse, temporal_adj, params.coarse_hop_weights))
            ),
        ),
        params.coarse_embed,
    )
    return softmax_rows(matmul(fine, transpose(coarse)))


def cross_scale_spatial_fuse(x_fine, coarse_terms):
    """Add every coarse contribution back at the joint scale.

    coarse_terms holds (x_r, mapping, projection) triples; each frame becomes
    x[t] + sum_r mapping x_r[t] projection.
    """
    out = x_fine
    for x_r, mapping, projection in coarse_terms:
        out = add(out, matmul(matmul(mapping, x_r), projection))
    return out


def temporal_fill_operator(frames, coarse_frames):
    """0/1 matrix (T, T_r) duplicating each coarse frame over its group.

    Each coarse frame occupies its own group's positions (duplicates placed
    after it); trimmed trailing frames receive zero.
    """
    group = frames // coarse_frames
    fill = np.zeros((frames, coarse_frames))
    for j in range(coarse_frames):
        fill[j * group:(j + 1) * group, j] = 1.0
    return Tensor(fill)


def cross_scale_temporal_fuse(x_fine, coarse_list):
    """Duplicate coarse frames up to full length and sum onto the fine scale."""
    out = x_fine
    frames = x_fine.shape[0]
    for x_r in coarse_list:
        fill = temporal_fill_operator(frames, x_r.shape[0])
        filled = transpose(matmul(fill, transpose(x_r, (1, 0, 2))), (1, 0, 2))
        out = add(out, filled)
    return out
