"""Motion sequence I/O, synthetic sequences, and window extraction.

The on-disk format is a plain CSV: header ``M,C,unit``, then one row per
frame with M*C values in joint-major order (j0c0, j0c1, ..., j1c0, ...).
Values are written with full float64 precision so a save/load round trip is
value-identical.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class MotionSequence:
    frames: np.ndarray          # (T, M, C)
    unit: str = "raw"
    frame_rate: float = 0.0     # informational only, not serialized

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be (T, M, C), got {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise ValueError("motion sequence contains non-finite values")

    @property
    def joints(self):
        return self.frames.shape[1]

    @property
    def channels(self):
        return self.frames.shape[2]


def load_motion_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    head = lines[0].split(",")
    if len(head) != 3:
        raise ValueError(f"{path}:1: header must be 'M,C,unit', got {lines[0]!r}")
    try:
        joints, channels = int(head[0]), int(head[1])
    except ValueError as e:
        raise ValueError(f"{path}:1: non-integer joint/channel count") from e
    if joints < 1 or channels < 1:
        raise ValueError(f"{path}:1: joint and channel counts must be positive")
    unit = head[2].strip()
    width = joints * channels
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise ValueError(
                f"{path}:{lineno}: expected {width} values, got {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: non-numeric cell") from e
    if not rows:
        raise ValueError(f"{path}: no frames")
    frames = np.asarray(rows).reshape(len(rows), joints, channels)
    return MotionSequence(frames, unit=unit)


def save_motion_csv(path, seq):
    frames, joints, channels = seq.frames.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{joints},{channels},{seq.unit}\n")
        flat = seq.frames.reshape(frames, joints * channels)
        for row in flat:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def synth_generate(joints, total_frames, seed, channels=3,
                   amplitude_range=(0.05, 0.15)):
    """Deterministic sinusoid-plus-drift motion on a chain skeleton.

    Each joint oscillates at one frequency (an exact DFT bin, shared with its
    chain partner to mimic coordinated limbs); every channel gets its own
    amplitude, phase, offset, and a drift that scales with the amplitude (so
    zero amplitude yields a constant sequence).
    """
    if joints < 2:
        raise ValueError(f"need at least 2 joints, got {joints}")
    if total_frames < 12:
        raise ValueError(f"need at least 12 frames, got {total_frames}")
    rng = np.random.default_rng(seed)
    max_bin = max(3, total_frames // 6)
    group_bins = rng.integers(3, max_bin + 1, size=(joints + 1) // 2)
    bins = np.array([group_bins[j // 2] for j in range(joints)])
    omegas = 2.0 * np.pi * bins / total_frames

    t = np.arange(total_frames)[:, None, None]
    amp = rng.uniform(*amplitude_range, size=(1, joints, channels))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(1, joints, channels))
    offset = rng.uniform(-0.5, 0.5, size=(1, joints, channels))
    drift = amp * rng.uniform(-1.0, 1.0, size=(1, joints, channels)) / total_frames
    frames = offset + drift * t + amp * np.sin(omegas[None, :, None] * t + phase)
    return MotionSequence(frames, unit="synth")


def extract_windows(frames, observed, horizon, stride=1):
    """(observed, future) pairs cut from one sequence; no boundary straddling."""
    frames = np.asarray(frames)
    if stride < 1:
        raise ValueError("stride must be at least 1")
    span = observed + horizon
    pairs = []
    start = 0
    while start + span <= len(frames):
        pairs.append((
            frames[start:start + observed].copy(),
            frames[start + observed:start + span].copy(),
        ))
        start += stride
    return pairs


@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list


def split_windows(pairs, val_fraction=0.0, test_fraction=0.0, seed=0):
    """Deterministic shuffle-and-slice partition of window pairs."""
    if val_fraction + test_fraction > 0.9:
        raise ValueError("leave at least 10% of windows for training")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_val = int(len(pairs) * val_fraction)
    n_test = int(len(pairs) * test_fraction)
    val = [pairs[i] for i in order[:n_val]]
    test = [pairs[i] for i in order[n_val:n_val + n_test]]
    train = [pairs[i] for i in order[n_val + n_test:]]
    return DatasetSplit(train=train, val=val, test=test)
