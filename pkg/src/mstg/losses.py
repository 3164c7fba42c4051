"""The three training losses and their weighted combination."""

from dataclasses import dataclass

from .tensor import (
    DimensionError,
    Tensor,
    absval,
    add,
    as_tensor,
    concat,
    frame,
    log_clamped,
    matmul,
    mul,
    reduce_sum,
    reshape,
    scale,
    sub,
    transpose,
)

LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    prediction: float = 1.0
    gram: float = 0.01
    entropy: float = 0.03

    def __post_init__(self):
        if min(self.prediction, self.gram, self.entropy) < 0:
            raise ValueError("loss weights must be nonnegative")


def l1_prediction_loss(pred, truth):
    """Sum of absolute elementwise differences over the whole tensors."""
    pred, truth = as_tensor(pred), as_tensor(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return reduce_sum(absval(sub(pred, truth)))


def _pair_gram(prev, cur):
    """Per-joint gram matrices of two stacked frames: (M, C) x2 -> (M, C, C)."""
    joints, channels = prev.shape
    stacked = concat(
        [reshape(prev, (joints, channels, 1)), reshape(cur, (joints, channels, 1))],
        axis=2,
    )
    return matmul(stacked, transpose(stacked, (0, 2, 1)))


def gram_matrix_loss(pred, truth, last_observed):
    """Mean squared Frobenius gap between consecutive-frame gram matrices.

    For every joint and every predicted step t, the gram matrix of the frame
    pair (t-1, t) is compared between prediction and ground truth; at the
    first step both sides share ``last_observed`` as the previous frame.
    """
    pred, truth = as_tensor(pred), as_tensor(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    horizon = pred.shape[0]
    prev_pred = as_tensor(last_observed)
    prev_truth = prev_pred
    total = None
    for t in range(horizon):
        cur_pred = frame(pred, t)
        cur_truth = frame(truth, t)
        gap = sub(_pair_gram(prev_truth, cur_truth), _pair_gram(prev_pred, cur_pred))
        term = reduce_sum(mul(gap, gap))
        total = term if total is None else add(total, term)
        prev_pred, prev_truth = cur_pred, cur_truth
    return scale(total, 1.0 / horizon)


def entropy_loss(assignments):
    """Mean row entropy across all listed row-stochastic assignment matrices.

    Zero rows-entropy means one-hot assignments; uniform rows give ln(M_r).
    Logs of exact zeros are clamped at log(1e-12).
    """
    if not assignments:
        return Tensor(0.0)
    total = None
    for psi in assignments:
        psi = as_tensor(psi)
        if float(psi.data.min()) < 0.0:
            raise ValueError("assignment matrices must be nonnegative")
        rows = psi.shape[0]
        ent = scale(reduce_sum(mul(psi, log_clamped(psi, LOG_EPS))), -1.0 / rows)
        total = ent if total is None else add(total, ent)
    return scale(total, 1.0 / len(assignments))


def total_loss(prediction, gram, entropy, weights):
    """Weighted sum of the three components (any component may be None)."""
    total = None
    for term, w in ((prediction, weights.prediction), (gram, weights.gram),
                    (entropy, weights.entropy)):
        if term is None:
            continue
        piece = scale(term, w)
        total = piece if total is None else add(total, piece)
    return total if total is not None else Tensor(0.0)
