"""Optimizer, gradient clipping, the mini-batch loop, and checkpoint files.

Training is deterministic given the config seed: parameter init, batch
shuffling and the (sequential) gradient reduction all draw from seeded
generators, so two runs with the same inputs produce identical logs,
checkpoints and predictions.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import format_config, parse_config
from .metrics import mae
from .model import MotionModel
from .tensor import Tape, add, scale


def _check_finite_grads(grads):
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise ArithmeticError(f"non-finite gradient for {name}; training step aborted")


def global_grad_norm(grads):
    """Global l2 norm over a gradient dict (finiteness enforced)."""
    total = 0.0
    for g in grads.values():
        total += kernels.sumsq(np.ascontiguousarray(g).ravel())
    if not math.isfinite(total):
        _check_finite_grads(grads)  # names the offending tensor
        raise ArithmeticError("gradient norm overflow; training step aborted")
    return math.sqrt(total)


def clip_global_norm(grads, max_norm=0.5):
    """Scale all gradients by max_norm/|g| when the global l2 norm exceeds it.

    Returns (clipped dict, pre-clip norm). Gradients are returned unchanged
    (same arrays) when below the threshold.
    """
    norm = global_grad_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


def clip_per_tensor(grads, max_norm=0.5):
    """Clip each gradient tensor to max_norm independently."""
    _check_finite_grads(grads)
    out = {}
    worst = 0.0
    for name, g in grads.items():
        norm = math.sqrt(kernels.sumsq(np.ascontiguousarray(g).ravel()))
        worst = max(worst, norm)
        out[name] = g * (max_norm / norm) if norm > max_norm else g
    return out, worst


class Adam:
    """Adam with bias correction; re-applies structural zero masks after
    every update and skips frozen parameters."""

    def __init__(self, params, learning_rate=1e-4, beta1=0.9, beta2=0.999,
                 eps=1e-8, masks=()):
        self.params = dict(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.masks = list(masks)
        self.step_count = 0
        self.moment1 = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.moment2 = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self._mask_by_id = {id(t): m for t, m in self.masks}

    def step(self, grads, grad_scale=1.0):
        """Apply one update; ``grad_scale`` folds norm clipping into the pass."""
        self.step_count += 1
        for name, p in self.params.items():
            if p.frozen:
                continue
            g = grads.get(name)
            if g is None:
                continue
            if not math.isfinite(float(g.sum())) and not np.isfinite(g).all():
                raise ArithmeticError(
                    f"non-finite gradient for {name}; training step aborted"
                )
            mask = self._mask_by_id.get(id(p))
            if mask is not None:
                g = np.where(mask, 0.0, g)
            kernels.adam_update(
                p.data.ravel(), np.ascontiguousarray(g).ravel(),
                self.moment1[name].ravel(), self.moment2[name].ravel(),
                self.learning_rate, self.beta1, self.beta2, self.eps,
                self.step_count, grad_scale,
            )
        for tensor, mask in self.masks:
            tensor.data[mask] = 0.0


@dataclass
class EpochStats:
    epoch: int
    step: int
    l_pred: float
    l_gram: float
    l_ent: float
    total: float
    mae: float

    def csv_row(self):
        return (
            f"{self.epoch},{self.step},{self.l_pred:.6g},{self.l_gram:.6g},"
            f"{self.l_ent:.6g},{self.total:.6g},{self.mae:.6g}"
        )


LOG_HEADER = "epoch,step,l_pred,l_gram,l_ent,total,mae"
DIVERGENCE_LIMIT = 1e9


def train(pairs, model, config, log_path=None, on_forward=None):
    """Mini-batch training over (observed, future) window pairs.

    Returns (stats rows, optimizer). Shuffling is seeded; the per-epoch CSV
    log row carries the mean loss components and train MAE of that epoch.
    Stops early at config.max_steps or once train MAE < config.target_mae.
    """
    if not pairs:
        raise ValueError("no training windows")
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(
        model.params(), learning_rate=config.learning_rate,
        beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps,
        masks=model.zero_masks(),
    )
    names = list(model.params().keys())
    tensors = [model.params()[n] for n in names]

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    if log_fh:
        log_fh.write(LOG_HEADER + "\n")
    rows = []
    step = 0
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(len(pairs))
            sums = np.zeros(4)
            mae_sum = 0.0
            seen = 0
            stop = False
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                with Tape() as tape:
                    batch_total = None
                    for idx in batch:
                        observed, future = pairs[idx]
                        out = model.loss(observed, future)
                        if on_forward is not None:
                            on_forward(out)
                        batch_total = (
                            out.total if batch_total is None
                            else add(batch_total, out.total)
                        )
                        sums += (out.prediction, out.gram, out.entropy,
                                 out.total.data.item())
                        mae_sum += mae(out.pred.data, np.asarray(future))[1]
                        seen += 1
                    batch_total = scale(batch_total, 1.0 / len(batch))
                if batch_total.data.item() > DIVERGENCE_LIMIT:
                    raise ArithmeticError(
                        f"training diverged: loss {batch_total.data.item():g}"
                    )
                grads = dict(zip(names, tape.gradients(batch_total, tensors)))
                if config.clip_mode == "global":
                    # same semantics as clip_global_norm, with the rescale
                    # folded into the Adam pass instead of copying every array
                    norm = global_grad_norm(grads)
                    factor = config.clip_norm / norm if norm > config.clip_norm else 1.0
                    optimizer.step(grads, grad_scale=factor)
                else:
                    grads, _ = clip_per_tensor(grads, config.clip_norm)
                    optimizer.step(grads)
                step += 1
                if config.max_steps and step >= config.max_steps:
                    stop = True
                    break
            stats = EpochStats(
                epoch=epoch, step=step,
                l_pred=sums[0] / seen, l_gram=sums[1] / seen,
                l_ent=sums[2] / seen, total=sums[3] / seen,
                mae=mae_sum / seen,
            )
            rows.append(stats)
            if log_fh:
                log_fh.write(stats.csv_row() + "\n")
            if config.target_mae > 0 and stats.mae < config.target_mae:
                break
            if stop:
                break
    finally:
        if log_fh:
            log_fh.close()
    return rows, optimizer


# ---------------------------------------------------------------------------
# checkpoint format: magic "MSTG", little-endian throughout
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"MSTG"
CHECKPOINT_VERSION = 1


def _write_array(fh, name, arr):
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)
    arr64 = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", arr64.ndim))
    for extent in arr64.shape:
        fh.write(struct.pack("<Q", extent))
    fh.write(arr64.tobytes())


def _read_array(fh):
    (name_len,) = struct.unpack("<I", fh.read(4))
    name = fh.read(name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
    return name, data


def save_checkpoint(path, model, optimizer=None, step=None):
    """Serialize config text, parameters and optimizer moments."""
    arrays = {name: p.data for name, p in model.params().items()}
    if optimizer is not None:
        for name, m in optimizer.moment1.items():
            arrays[f"optim.m.{name}"] = m
        for name, v in optimizer.moment2.items():
            arrays[f"optim.v.{name}"] = v
    if step is None:
        step = optimizer.step_count if optimizer is not None else 0
    config_text = format_config(model.config).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", step))
        fh.write(struct.pack("<I", len(config_text)))
        fh.write(config_text)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            _write_array(fh, name, arrays[name])


def load_checkpoint(path):
    """Read a checkpoint into (config, named arrays, step)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (step,) = struct.unpack("<Q", fh.read(8))
        (config_len,) = struct.unpack("<I", fh.read(4))
        config = parse_config(fh.read(config_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            name, data = _read_array(fh)
            arrays[name] = data
    return config, arrays, step


def load_model(path):
    """Rebuild the model (and optimizer moments) stored in a checkpoint."""
    config, arrays, step = load_checkpoint(path)
    model = MotionModel(config, config.skeleton())
    np_dtype = np.float32 if config.dtype == "float32" else np.float64
    for name, p in model.params().items():
        stored = arrays.get(name)
        if stored is None:
            raise ValueError(f"{path}: checkpoint is missing parameter {name!r}")
        if stored.shape != p.data.shape:
            raise ValueError(
                f"{path}: parameter {name!r} has shape {stored.shape}, "
                f"expected {p.data.shape}"
            )
        p.data = np.ascontiguousarray(stored, dtype=np_dtype)
    model.apply_masks()
    moments = {
        name[len("optim.m."):]: arr for name, arr in arrays.items()
        if name.startswith("optim.m.")
    }, {
        name[len("optim.v."):]: arr for name, arr in arrays.items()
        if name.startswith("optim.v.")
    }
    return model, config, moments, step
