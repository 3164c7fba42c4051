"""The finite-difference check suite behind the ``gradcheck`` CLI command.

Every differentiable operation gets a scalar readout whose tape gradient is
compared against central differences, ending with the full encoder-decoder
at toy scale (4 frames, 5 joints, 2 scales, 8 state dims).
"""

import numpy as np

from .config import Config
from .convolution import spatial_graph_conv, ss_gc, temporal_graph_conv
from .decoder import GaGruParams, attention_gate, ga_gru_cell
from .gradcheck import grad_check
from .graphs import SkeletonSpec, graph_power, init_spatial, init_temporal_cyclic
from .losses import l1_prediction_loss
from .model import MotionModel
from .pooling import (
    SpatialPoolParams,
    UnpoolParams,
    spatial_pool_operator,
    spatial_unpool_operator,
)
from .tensor import (
    Tensor,
    absval,
    add,
    matmul,
    merge_time_channels,
    mul,
    parameter,
    reduce_sum,
    relu,
    sigmoid,
    softmax_rows,
    sub,
    tanh,
)

TOLERANCE = 1e-4
STEP = 1e-5


def toy_config(**overrides):
    """Smallest full-architecture configuration used by the gradient suite."""
    base = dict(
        observed_frames=4,
        predict_frames=2,
        channels=3,
        diff_order=2,
        layer_dims=(6, 8),
        spatial_scales=2,
        temporal_scales=2,
        spatial_hops=1,
        temporal_hops=1,
        embed_dim=4,
        seed=0,
    )
    base.update(overrides)
    return Config(**base).validate()


def toy_skeleton(joints=5, channels=3):
    return SkeletonSpec.chain(joints, channels)


def _weighted(x, rng):
    """Scalar readout with a fixed random weighting (keeps gradients generic)."""
    w = Tensor(rng.standard_normal(x.shape))
    return reduce_sum(mul(x, w))


def build_suite(seed=0):
    """(name, callable -> GradCheckReport) pairs covering every tape op."""
    checks = []

    def register(name, fn):
        checks.append((name, fn))

    def check_matmul():
        rng = np.random.default_rng(seed)
        a = parameter(rng.standard_normal((5, 4)), "a")
        b = parameter(rng.standard_normal((4, 3)), "b")
        return grad_check(
            lambda: _weighted(matmul(a, b), np.random.default_rng(seed + 1)),
            {"a": a, "b": b}, step=STEP, tol=TOLERANCE,
        )

    register("matmul", check_matmul)

    def make_unary(op, shift=0.0):
        def run():
            rng = np.random.default_rng(seed)
            x = parameter(rng.standard_normal((4, 6)) + shift, "x")
            return grad_check(
                lambda: _weighted(op(x), np.random.default_rng(seed + 1)),
                {"x": x}, step=STEP, tol=TOLERANCE,
            )
        return run

    register("relu", make_unary(relu))
    register("sigmoid", make_unary(sigmoid))
    register("tanh", make_unary(tanh))
    register("abs", make_unary(absval, shift=0.5))
    register("softmax_rows", make_unary(softmax_rows))

    def check_binary():
        rng = np.random.default_rng(seed)
        a = parameter(rng.standard_normal((4, 5)), "a")
        b = parameter(rng.standard_normal((4, 5)), "b")
        row = parameter(rng.standard_normal((1, 5)), "row")
        col = parameter(rng.standard_normal((4, 1)), "col")

        def f():
            r = np.random.default_rng(seed + 1)
            mixed = mul(add(a, row), sub(mul(a, b), col))
            return _weighted(mixed, r)

        return grad_check(f, {"a": a, "b": b, "row": row, "col": col},
                          step=STEP, tol=TOLERANCE)

    register("elementwise_broadcast", check_binary)

    def check_merge():
        rng = np.random.default_rng(seed)
        x = parameter(rng.standard_normal((3, 4, 5)), "x")
        return grad_check(
            lambda: _weighted(merge_time_channels(x), np.random.default_rng(seed + 1)),
            {"x": x}, step=STEP, tol=TOLERANCE,
        )

    register("merge_time_channels", check_merge)

    def check_graph_power():
        rng = np.random.default_rng(seed)
        adj = parameter(rng.standard_normal((4, 4)) * 0.5, "adj")

        def f():
            r = np.random.default_rng(seed + 1)
            return add(
                _weighted(graph_power(adj, 2), r),
                _weighted(graph_power(adj, -2), r),
            )

        return grad_check(f, {"adj": adj}, step=STEP, tol=TOLERANCE)

    register("graph_power", check_graph_power)

    def check_ss_gc_l1():
        rng = np.random.default_rng(seed)
        skeleton = toy_skeleton()
        graph = init_spatial(skeleton, "adj")
        x = Tensor(rng.standard_normal((3, 5, 4)))
        weights = parameter(rng.standard_normal((2, 4, 3)) * 0.5, "weights")
        target = Tensor(rng.standard_normal((3, 5, 3)))

        def f():
            return l1_prediction_loss(ss_gc(x, graph.adjacency, weights), target)

        return grad_check(f, {"weights": weights, "adjacency": graph.adjacency},
                          step=STEP, tol=TOLERANCE)

    register("ss_gc_l1", check_ss_gc_l1)

    def check_temporal_conv():
        rng = np.random.default_rng(seed)
        graph = init_temporal_cyclic(5, "tadj")
        x = parameter(rng.standard_normal((5, 3, 4)), "x")
        weights = parameter(rng.standard_normal((5, 4, 2)) * 0.5, "weights")

        def f():
            r = np.random.default_rng(seed + 1)
            return _weighted(temporal_graph_conv(x, graph.adjacency, weights), r)

        return grad_check(f, {"x": x, "weights": weights, "adjacency": graph.adjacency},
                          step=STEP, tol=TOLERANCE)

    register("temporal_conv", check_temporal_conv)

    def check_pool_operator():
        rng = np.random.default_rng(seed)
        skeleton = toy_skeleton()
        sgraph = init_spatial(skeleton, "adj")
        tgraph = init_temporal_cyclic(4, "tadj")
        x = Tensor(rng.standard_normal((4, 5, 3)))
        params = SpatialPoolParams(
            hop_weights=parameter(rng.standard_normal((3, 3, 3)) * 0.5, "hop"),
            assign_weights=parameter(rng.standard_normal((12, 3)) * 0.5, "assign"),
        )

        def f():
            r = np.random.default_rng(seed + 1)
            psi = spatial_pool_operator(x, sgraph.adjacency, tgraph.adjacency, params)
            return _weighted(psi, r)

        return grad_check(
            f,
            {"hop": params.hop_weights, "assign": params.assign_weights,
             "spatial_adj": sgraph.adjacency},
            step=STEP, tol=TOLERANCE,
        )

    register("spatial_pool_operator", check_pool_operator)

    def check_unpool_operator():
        rng = np.random.default_rng(seed)
        skeleton = toy_skeleton()
        sgraph = init_spatial(skeleton, "adj")
        tgraph = init_temporal_cyclic(4, "tadj")
        fine = Tensor(rng.standard_normal((4, 5, 3)))
        coarse = Tensor(rng.standard_normal((4, 3, 3)))
        coarse_adj = parameter(rng.standard_normal((3, 3)), "coarse_adj")
        params = UnpoolParams(
            fine_hop_weights=parameter(rng.standard_normal((3, 3, 3)) * 0.5, "fh"),
            coarse_hop_weights=parameter(rng.standard_normal((3, 3, 3)) * 0.5, "ch"),
            fine_embed=parameter(rng.standard_normal((12, 4)) * 0.5, "fe"),
            coarse_embed=parameter(rng.standard_normal((12, 4)) * 0.5, "ce"),
            fuse_weights=parameter(rng.standard_normal((3, 3)), "fw"),
        )

        def f():
            r = np.random.default_rng(seed + 1)
            mapping = spatial_unpool_operator(
                fine, coarse, sgraph.adjacency, coarse_adj, tgraph.adjacency, params
            )
            return _weighted(mapping, r)

        return grad_check(
            f,
            {"fine_hop": params.fine_hop_weights, "coarse_hop": params.coarse_hop_weights,
             "fine_embed": params.fine_embed, "coarse_embed": params.coarse_embed},
            step=STEP, tol=TOLERANCE,
        )

    register("spatial_unpool_operator", check_unpool_operator)

    def check_attention_gate():
        rng = np.random.default_rng(seed)
        graph = parameter(rng.standard_normal((5, 5)), "graph")
        z = Tensor(rng.standard_normal((5, 4)))
        mix = parameter(rng.standard_normal((4, 4)), "mix")
        score = parameter(rng.standard_normal((4, 1)), "score")

        def f():
            r = np.random.default_rng(seed + 1)
            return _weighted(attention_gate(z, graph, mix, score), r)

        return grad_check(f, {"graph": graph, "mix": mix, "score": score},
                          step=STEP, tol=TOLERANCE)

    register("attention_gate", check_attention_gate)

    def check_gru_cell():
        rng = np.random.default_rng(seed)
        skeleton = toy_skeleton()
        params = GaGruParams.build(rng, skeleton, state_dim=8)
        inputs = Tensor(rng.standard_normal((5, 9)))
        state = Tensor(rng.standard_normal((5, 8)))

        def f():
            r = np.random.default_rng(seed + 1)
            return _weighted(ga_gru_cell(inputs, state, params), r)

        return grad_check(f, params.named(), step=STEP, tol=TOLERANCE)

    register("ga_gru_cell", check_gru_cell)

    def check_full_model():
        rng = np.random.default_rng(seed)
        config = toy_config()
        model = MotionModel(config, toy_skeleton(), rng=np.random.default_rng(seed + 7))
        observed = rng.standard_normal((config.observed_frames, 5, 3)) * 0.5
        future = rng.standard_normal((config.predict_frames, 5, 3)) * 0.5

        def f():
            return model.loss(observed, future).total

        return grad_check(f, model.params(), step=STEP, tol=TOLERANCE)

    register("encoder_decoder_toy", check_full_model)

    return checks


def run_suite(seed=0, verbose=True):
    """Run every check; returns True when all pass."""
    ok = True
    for name, fn in build_suite(seed):
        report = fn()
        ok = ok and report.passed
        if verbose:
            status = "pass" if report.passed else "FAIL"
            print(f"{status}  {name}: worst rel err {report.worst:.3e} "
                  f"(tol {report.tol:g})")
    return ok
