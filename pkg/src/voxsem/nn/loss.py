"""Per-voxel weighted softmax cross-entropy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._validation import ValidationError


@dataclass
class LossOutput:
    """total is the weighted sum; mean divides by the number of w=1 voxels."""

    total: float
    mean: float
    weighted_count: int
    grad: np.ndarray = field(repr=False)


def weighted_softmax_loss(logits, labels, weights) -> LossOutput:
    """Softmax cross-entropy summed over voxels with per-voxel 0/1 weights.

    logits: (n, c, d, h, w); labels: (n, d, h, w) ints in [0, c);
    weights: (n, d, h, w), nonzero marks contributing voxels. The gradient
    is (softmax - onehot) * weight, matching the raw sum (not the mean).
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if logits.ndim != 5:
        raise ValidationError(f"logits: expected (n, c, d, h, w), got {logits.shape}")
    n, c = logits.shape[:2]
    spatial = logits.shape[2:]
    if labels.shape != (n, *spatial):
        raise ValidationError(f"labels shape {labels.shape} does not match {(n, *spatial)}")
    if weights.shape != labels.shape:
        raise ValidationError(f"weights shape {weights.shape} does not match {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValidationError(f"labels outside [0, {c})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    softmax = exp / denom
    log_softmax = shifted - np.log(denom)

    onehot_idx = np.expand_dims(labels, 1)
    picked = np.take_along_axis(log_softmax, onehot_idx, axis=1)[:, 0]
    nll = -picked

    total = float((weights * nll).sum())
    count = int(np.count_nonzero(weights))
    mean = total / count if count else 0.0

    grad = softmax.copy()
    np.put_along_axis(
        grad, onehot_idx,
        np.take_along_axis(grad, onehot_idx, axis=1) - 1.0, axis=1)
    grad *= weights[:, None]
    return LossOutput(total=total, mean=mean, weighted_count=count, grad=grad)
