"""Autoregressive pose decoder: a gated recurrent cell whose input and state
rows are rescaled per joint by graph-attention scores before the gate maps.

Each step consumes second-order difference features of a rolling pose window
(seeded from the last observed frames so the difference channels are well
defined from the first step), updates the per-joint state, and emits a pose
displacement that accumulates onto the previous pose.
"""

from dataclasses import dataclass

import numpy as np

from .graphs import init_spatial
from .init import uniform_param, zeros_param
from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    matmul,
    mul,
    relu,
    sigmoid,
    stack_frames,
    sub,
    tanh,
)


@dataclass
class AffineMap:
    weights: Tensor
    bias: Tensor


def affine(z, m):
    return add(matmul(z, m.weights), m.bias)


@dataclass
class AttentionWeights:
    mix: Tensor    # (d, d)
    score: Tensor  # (d, 1): one scalar score per joint


@dataclass
class GaGruParams:
    """All trainable state of the decoder cell and pose readout."""

    input_graph: Tensor
    state_graph: Tensor
    input_att: AttentionWeights
    state_att: AttentionWeights
    reset_in: AffineMap
    reset_state: AffineMap
    update_in: AffineMap
    update_state: AffineMap
    cand_in: AffineMap
    cand_state: AffineMap
    readout_hidden: AffineMap
    readout_out: AffineMap

    @staticmethod
    def build(rng, skeleton, state_dim, diff_order=2, readout_hidden=0, dtype="float64"):
        np_dtype = np.float32 if dtype == "float32" else np.float64
        channels = skeleton.channels
        in_dim = channels * (diff_order + 1)
        hidden = readout_hidden if readout_hidden > 0 else max(1, state_dim // 2)

        def w(shape, fan_in, name):
            return uniform_param(rng, shape, fan_in, f"decoder.{name}", np_dtype)

        def b(width, name):
            return zeros_param((1, width), f"decoder.{name}", np_dtype)

        def gate(in_features, name):
            return AffineMap(w((in_features, state_dim), in_features, f"{name}.w"),
                             b(state_dim, f"{name}.b"))

        input_graph = init_spatial(skeleton, "decoder.input_adj").adjacency
        state_graph = init_spatial(skeleton, "decoder.state_adj").adjacency
        input_graph.data = input_graph.data.astype(np_dtype)
        state_graph.data = state_graph.data.astype(np_dtype)
        return GaGruParams(
            input_graph=input_graph,
            state_graph=state_graph,
            input_att=AttentionWeights(
                w((in_dim, in_dim), in_dim, "input_att.mix"),
                w((in_dim, 1), in_dim, "input_att.score"),
            ),
            state_att=AttentionWeights(
                w((state_dim, state_dim), state_dim, "state_att.mix"),
                w((state_dim, 1), state_dim, "state_att.score"),
            ),
            reset_in=gate(in_dim, "reset_in"),
            reset_state=gate(state_dim, "reset_state"),
            update_in=gate(in_dim, "update_in"),
            update_state=gate(state_dim, "update_state"),
            cand_in=gate(in_dim, "cand_in"),
            cand_state=gate(state_dim, "cand_state"),
            readout_hidden=AffineMap(
                w((state_dim, hidden), state_dim, "readout_hidden.w"),
                b(hidden, "readout_hidden.b"),
            ),
            # zero-initialized so the untrained decoder emits zero displacement
            # (first prediction starts at the last observed pose)
            readout_out=AffineMap(
                zeros_param((hidden, channels), "decoder.readout_out.w", np_dtype),
                b(channels, "readout_out.b"),
            ),
        )

    def named(self):
        out = {}
        for attr in ("input_graph", "state_graph"):
            out[getattr(self, attr).name] = getattr(self, attr)
        for att in (self.input_att, self.state_att):
            out[att.mix.name] = att.mix
            out[att.score.name] = att.score
        for m in (self.reset_in, self.reset_state, self.update_in, self.update_state,
                  self.cand_in, self.cand_state, self.readout_hidden, self.readout_out):
            out[m.weights.name] = m.weights
            out[m.bias.name] = m.bias
        return out

    def graph_params(self):
        return [self.input_graph, self.state_graph]


def attention_gate(z, graph, mix, score):
    """Rescale each row of z by a per-joint score in (0, 1).

    score_i = sigmoid(ReLU(A z W) u)_i; the output is score_i * z_i row-wise.
    """
    scores = sigmoid(matmul(relu(matmul(matmul(graph, z), mix)), score))
    return mul(scores, z)


def ga_gru_cell(inputs, state, params, gated=True):
    """One gated state update; inputs (M, C*(order+1)), state (M, D_h)."""
    if gated:
        ia = attention_gate(inputs, params.input_graph, params.input_att.mix,
                            params.input_att.score)
        ha = attention_gate(state, params.state_graph, params.state_att.mix,
                            params.state_att.score)
    else:
        ia, ha = inputs, state
    reset = sigmoid(add(affine(ia, params.reset_in), affine(ha, params.reset_state)))
    update = sigmoid(add(affine(ia, params.update_in), affine(ha, params.update_state)))
    cand = tanh(add(affine(ia, params.cand_in), mul(reset, affine(ha, params.cand_state))))
    ones = Tensor(np.ones(update.shape, dtype=update.data.dtype))
    return add(mul(update, state), mul(sub(ones, update), cand))


def pose_readout(state, params):
    """Two-layer perceptron state -> displacement, tanh between layers."""
    hidden = tanh(affine(state, params.readout_hidden))
    return affine(hidden, params.readout_out)


def _window_diffs(window, order):
    """Difference features of the newest frame from a rolling pose window.

    window holds order+1 poses, oldest first; output is (M, C*(order+1)).
    """
    feats = [window[-1]]
    level = list(window)
    for _ in range(order):
        level = [sub(level[i + 1], level[i]) for i in range(len(level) - 1)]
        feats.append(level[-1])
    return concat(feats, axis=1)


def rollout(recent_poses, state, steps, params, diff_order=2, gated=True,
            targets=None, divergence_limit=1e6):
    """Predict ``steps`` future poses autoregressively.

    recent_poses: at least diff_order+1 trailing observed poses (M, C), oldest
    first, seeding the difference window. When ``targets`` is given (teacher
    forcing), ground-truth frames take the place of emitted ones in the
    window. Returns a (steps, M, C) tensor; aborts if any emitted value
    exceeds ``divergence_limit`` in magnitude.
    """
    if steps < 1:
        raise ValueError(f"rollout needs at least one step, got {steps}")
    window = [as_tensor(p) for p in recent_poses]
    if len(window) < diff_order + 1:
        raise ValueError(
            f"rollout needs {diff_order + 1} recent poses, got {len(window)}"
        )
    window = window[-(diff_order + 1):]
    h = state
    emitted = []
    for step in range(steps):
        h = ga_gru_cell(_window_diffs(window, diff_order), h, params, gated=gated)
        pose = add(window[-1], pose_readout(h, params))
        if float(np.abs(pose.data).max()) > divergence_limit:
            raise ArithmeticError(
                f"rollout diverged at step {step}: |pose| > {divergence_limit:g}"
            )
        emitted.append(pose)
        follow = as_tensor(targets[step]) if targets is not None else pose
        window = window[1:] + [follow]
    return stack_frames(emitted)
