"""Loss functions and their input gradients."""

from __future__ import annotations

import numpy as np

_CLAMP_LO = 1e-12
_CLAMP_HI = 1.0 - 1e-12


def cross_entropy_loss(probs, targets) -> float:
    """Mean over the batch of -sum_c y_c * log(p_c).

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the log; for two
    classes this is the usual binary cross-entropy.
    """
    probs = np.asarray(probs)
    targets = np.asarray(targets)
    if probs.shape != targets.shape:
        raise ValueError(f"probs shape {probs.shape} != targets shape {targets.shape}")
    pc = np.clip(probs, _CLAMP_LO, _CLAMP_HI)
    return float(-(targets * np.log(pc)).sum() / probs.shape[0])


def cross_entropy_grad(probs, targets) -> np.ndarray:
    probs = np.asarray(probs)
    targets = np.asarray(targets)
    if probs.shape != targets.shape:
        raise ValueError(f"probs shape {probs.shape} != targets shape {targets.shape}")
    pc = np.clip(probs, _CLAMP_LO, _CLAMP_HI)
    inside = (probs > _CLAMP_LO) & (probs < _CLAMP_HI)  # clamp has zero slope outside
    return np.where(inside, -targets / pc, 0.0) / probs.shape[0]


def mse_loss(pred, target) -> float:
    """Mean of elementwise squared differences."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float((diff * diff).mean())


def mse_grad(pred, target) -> np.ndarray:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    return 2.0 * (pred - target) / pred.size


LOSSES = {
    "cross_entropy": (cross_entropy_loss, cross_entropy_grad),
    "mse": (mse_loss, mse_grad),
}


def one_hot(labels, n_classes: int, dtype=np.float64) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out
