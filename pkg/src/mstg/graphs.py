"""Spatial and temporal graph types, initialization rules, and graph powers.

Spatial adjacency matrices are fully trainable and start from the skeleton
(bone edges plus self-loops). Temporal adjacency matrices start as a cyclic
one-step shift; only the initially nonzero entries are trainable, everything
else is pinned to zero by a structural mask that the optimizer re-applies
after every update. Adjacency matrices are used raw: no degree or Laplacian
normalization anywhere.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor import DimensionError, Tensor, matmul, parameter, transpose


@dataclass(frozen=True)
class SkeletonSpec:
    """Kinematic tree: joint count, undirected bone edges, channels per joint."""

    joint_count: int
    edges: tuple
    channels: int = 3

    def __post_init__(self):
        if self.joint_count < 1:
            raise ValueError("skeleton must have at least one joint")
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-edge {i}-{j} not allowed")
            if not (0 <= i < self.joint_count and 0 <= j < self.joint_count):
                raise ValueError(
                    f"edge {i}-{j} references a joint outside 0..{self.joint_count - 1}"
                )

    @staticmethod
    def chain(joint_count, channels=3):
        """Simple chain skeleton 0-1-2-...-(M-1)."""
        return SkeletonSpec(
            joint_count, tuple((i, i + 1) for i in range(joint_count - 1)), channels
        )

    @staticmethod
    def from_file(path):
        """Load from text: first line "M C", then one "i j" edge per line."""
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise ValueError(f"{path}: empty skeleton file")
        head = lines[0].split()
        if len(head) != 2:
            raise ValueError(f"{path}:1: expected 'M C'")
        joints, channels = int(head[0]), int(head[1])
        edges = []
        for n, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{n}: expected 'i j'")
            edges.append((int(parts[0]), int(parts[1])))
        return SkeletonSpec(joints, tuple(edges), channels)

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.joint_count} {self.channels}\n")
            for i, j in self.edges:
                fh.write(f"{i} {j}\n")


@dataclass
class SpatialGraph:
    """Trainable adjacency over joints (or joint groups) at one scale."""

    adjacency: Tensor
    scale_index: int = 0


@dataclass
class TemporalGraph:
    """Trainable adjacency over frames with a structural zero mask."""

    adjacency: Tensor
    zero_mask: np.ndarray = field(repr=False)

    def apply_mask(self):
        """Force masked entries back to exact zero (used after optimizer steps)."""
        self.adjacency.data[self.zero_mask] = 0.0


def init_spatial(skeleton, name=None):
    """Skeleton-initialized spatial graph: bones both ways plus self-loops."""
    m = skeleton.joint_count
    adj = np.eye(m)
    for i, j in skeleton.edges:
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    return SpatialGraph(parameter(adj, name), scale_index=0)


def init_temporal_cyclic(frames, name=None):
    """Cyclic one-step shift graph: entry (i, j) is 1 iff i == (j+1) mod T."""
    if frames < 2:
        raise ValueError(f"temporal graph needs at least 2 frames, got {frames}")
    adj = np.zeros((frames, frames))
    for j in range(frames):
        adj[(j + 1) % frames, j] = 1.0
    mask = adj == 0.0
    return TemporalGraph(parameter(adj, name), zero_mask=mask)


def graph_power(adj, exponent):
    """Integer power of an adjacency matrix, differentiable through the base.

    Non-negative exponents are repeated products (0 gives the identity);
    negative exponents use the transpose, ``A^-k := (A^T)^k``, which is the
    exact inverse for the initial cyclic shift and well defined for any
    trainable matrix.
    """
    adj = adj.adjacency if isinstance(adj, (SpatialGraph, TemporalGraph)) else adj
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise DimensionError(f"graph_power needs a square matrix, got {adj.shape}")
    if exponent == 0:
        return Tensor(np.eye(adj.shape[0], dtype=adj.data.dtype))
    base = transpose(adj) if exponent < 0 else adj
    out = base
    for _ in range(abs(exponent) - 1):
        out = matmul(out, base)
    return out


def cartesian_product(spatial, temporal):
    """Graph Cartesian product (Kronecker sum) of spatial and temporal graphs.

    Vertex (t, m) maps to flat index t*M + m, matching the row-major
    flattening of a (T, M, d) feature tensor. Returns a plain array: this is
    the oracle for the decomposition equivalence test and never appears in the
    training path.
    """
    s = spatial.adjacency.data if isinstance(spatial, SpatialGraph) else np.asarray(spatial)
    t = temporal.adjacency.data if isinstance(temporal, TemporalGraph) else np.asarray(temporal)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"spatial adjacency must be square, got {s.shape}")
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DimensionError(f"temporal adjacency must be square, got {t.shape}")
    m = s.shape[0]
    frames = t.shape[0]
    return np.kron(np.eye(frames), s) + np.kron(t, np.eye(m))
