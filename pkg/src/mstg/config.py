"""Flat ``key = value`` configuration shared by the CLI, trainer and checkpoints.

Unknown keys are errors so typos fail fast. The skeleton (joint count and
edge list) is folded into the config when training starts, which makes a
checkpoint self-contained.
"""

from dataclasses import dataclass, fields

from .graphs import SkeletonSpec


@dataclass
class Config:
    # model
    observed_frames: int = 10
    predict_frames: int = 5
    channels: int = 3
    diff_order: int = 2
    layer_dims: tuple = (64, 64, 128, 256)
    spatial_scales: int = 3
    temporal_scales: int = 3
    spatial_hops: int = 1
    temporal_hops: int = 4
    infer_hops: int = 1             # hops of the pooling/unpooling inference filters
    embed_dim: int = 32             # unpooling embedding width (0: layer output dim)
    conv_order: str = "spatial_first"
    gated_attention: bool = True
    trainable_graphs: bool = True
    teacher_forcing: bool = False
    dtype: str = "float64"
    # skeleton snapshot (filled from the skeleton file when training)
    joints: int = 0
    edges: str = ""                 # "i-j;i-j;..." pairs
    # training
    learning_rate: float = 1e-4
    batch_size: int = 32
    clip_norm: float = 0.5
    clip_mode: str = "global"       # or "per_tensor"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    max_steps: int = 0              # 0: no cap
    seed: int = 0
    loss_pred_weight: float = 1.0
    loss_gram_weight: float = 0.01
    loss_entropy_weight: float = 0.03
    # data windows
    window_stride: int = 1
    limit_windows: int = 0          # 0: use all windows
    target_mae: float = 0.0         # stop early once train MAE drops below (>0)

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.diff_order < 0:
            raise ValueError("diff_order must be >= 0")
        if self.observed_frames < self.diff_order + 1:
            raise ValueError("observed_frames must be at least diff_order + 1")
        if self.predict_frames < 1:
            raise ValueError("predict_frames must be at least 1")
        if not self.layer_dims:
            raise ValueError("layer_dims must not be empty")
        if self.spatial_hops < 0 or self.temporal_hops < 0 or self.infer_hops < 0:
            raise ValueError("hop counts must be >= 0")
        if self.conv_order not in ("spatial_first", "temporal_first"):
            raise ValueError(f"unknown conv_order {self.conv_order!r}")
        if self.clip_mode not in ("global", "per_tensor"):
            raise ValueError(f"unknown clip_mode {self.clip_mode!r}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unknown dtype {self.dtype!r}")
        return self

    def with_skeleton(self, skeleton):
        self.joints = skeleton.joint_count
        self.channels = skeleton.channels
        self.edges = ";".join(f"{i}-{j}" for i, j in skeleton.edges)
        return self

    def skeleton(self):
        if self.joints < 1:
            raise ValueError("config carries no skeleton (joints not set)")
        edges = []
        if self.edges:
            for piece in self.edges.split(";"):
                i, j = piece.split("-")
                edges.append((int(i), int(j)))
        return SkeletonSpec(self.joints, tuple(edges), self.channels)


def _parse_value(name, kind, raw):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError as e:
        raise ValueError(f"config key {name!r}: cannot parse value {raw!r}") from e


def parse_config(text, base=None):
    """Parse ``key = value`` lines into a Config; unknown keys are errors."""
    cfg = base if base is not None else Config()
    kinds = {f.name: f.type for f in fields(Config)}
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(Config)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in kinds:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _parse_value(key, types[key], raw))
    cfg.validate()
    return cfg


def load_config(path, base=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base=base)


def format_config(cfg):
    """Render a Config back to the flat text form (stable field order)."""
    lines = []
    for f in fields(Config):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
