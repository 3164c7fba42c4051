"""Prediction error metric.

MAE here is the mean over joints of the euclidean norm of the per-joint
angle-vector difference, reported per prediction horizon plus the mean over
horizons. Absolute numbers depend on this definition, so it is pinned here
rather than left to callers.
"""

import numpy as np


def mae(pred, truth):
    """(per-horizon errors of shape (steps,), mean over horizons)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    gaps = np.linalg.norm(pred - truth, axis=2)  # (steps, joints)
    per_horizon = gaps.mean(axis=1)
    return per_horizon, float(per_horizon.mean())
