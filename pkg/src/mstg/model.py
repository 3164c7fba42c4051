"""Full encoder-decoder model: build, predict, and training-loss assembly."""

from dataclasses import dataclass

import numpy as np

from .decoder import GaGruParams, rollout
from .encoder import Encoder
from .losses import LossWeights, entropy_loss, gram_matrix_loss, l1_prediction_loss, total_loss
from .pooling import ScaleSpec
from .tensor import Tensor


@dataclass
class LossBreakdown:
    total: object          # scalar Tensor on the tape
    prediction: float
    gram: float
    entropy: float
    pred: object           # (predict_frames, M, C) Tensor
    aux: object            # EncoderAux with the pooling operators


class MotionModel:
    """Multiscale graph encoder plus graph-attention recurrent decoder."""

    def __init__(self, config, skeleton, rng=None):
        config.validate()
        if skeleton.channels != config.channels:
            raise ValueError(
                f"skeleton has {skeleton.channels} channels, config says {config.channels}"
            )
        if config.observed_frames < config.diff_order + 1:
            raise ValueError("observed window too short for the difference order")
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        self.skeleton = skeleton
        self.scales = ScaleSpec.default(
            skeleton.joint_count, config.spatial_scales, config.temporal_scales
        )
        for r in range(config.temporal_scales):
            self.scales.coarse_length(config.observed_frames, r)  # validates lengths

        self.encoder = Encoder(
            rng, skeleton, config.observed_frames, config.diff_order,
            tuple(config.layer_dims), self.scales,
            spatial_hops=config.spatial_hops, temporal_hops=config.temporal_hops,
            infer_hops=config.infer_hops, embed_dim=config.embed_dim,
            conv_order=config.conv_order,
            dtype=config.dtype,
        )
        self.decoder = GaGruParams.build(
            rng, skeleton, self.encoder.state_dim,
            diff_order=config.diff_order, dtype=config.dtype,
        )
        self._params = {}
        self._params.update(self.encoder.params())
        self._params.update(self.decoder.named())
        if not config.trainable_graphs:
            for p in self.encoder.graph_params() + self.decoder.graph_params():
                p.frozen = True
        self.weights = LossWeights(
            config.loss_pred_weight, config.loss_gram_weight, config.loss_entropy_weight
        )

    def params(self):
        return dict(self._params)

    def zero_masks(self):
        return self.encoder.zero_masks()

    def apply_masks(self):
        for tensor, mask in self.zero_masks():
            tensor.data[mask] = 0.0

    def _as_input(self, frames):
        dtype = np.float32 if self.config.dtype == "float32" else np.float64
        return np.asarray(frames, dtype=dtype)

    def predict(self, observed, targets=None):
        """Observed (T, M, C) array -> ((predict_frames, M, C) Tensor, aux)."""
        observed = self._as_input(observed)
        state, aux = self.encoder.forward(Tensor(observed))
        tail = self.config.diff_order + 1
        recent = [Tensor(observed[t]) for t in range(len(observed) - tail, len(observed))]
        pred = rollout(
            recent, state, self.config.predict_frames, self.decoder,
            diff_order=self.config.diff_order,
            gated=self.config.gated_attention,
            targets=targets,
        )
        return pred, aux

    def loss(self, observed, future, teacher_forcing=None):
        """Full training loss of one (observed, future) window pair."""
        future = self._as_input(future)
        if teacher_forcing is None:
            teacher_forcing = self.config.teacher_forcing
        pred, aux = self.predict(observed, targets=future if teacher_forcing else None)
        truth = Tensor(future)
        w = self.weights
        pred_term = l1_prediction_loss(pred, truth)
        gram_term = (
            gram_matrix_loss(pred, truth, Tensor(self._as_input(observed)[-1]))
            if w.gram > 0 else None
        )
        ent_term = entropy_loss(aux.pool_ops) if w.entropy > 0 else None
        total = total_loss(pred_term, gram_term, ent_term, w)
        return LossBreakdown(
            total=total,
            prediction=pred_term.data.item(),
            gram=gram_term.data.item() if gram_term is not None else 0.0,
            entropy=ent_term.data.item() if ent_term is not None else 0.0,
            pred=pred,
            aux=aux,
        )
