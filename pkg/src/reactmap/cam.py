"""Class activation maps and class scores from features + linear head."""

from dataclasses import dataclass, field

import numpy as np

from reactmap.maps import validate_feature_map


@dataclass(frozen=True)
class ClassifierHead:
    """Per-class channel weights of a GAP-then-linear classifier.

    weights is (C, d); row c holds the channel weights for class c.
    bias, when present, has length C.
    """

    weights: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or min(w.shape) < 1:
            raise ValueError(f"weights must be (C, d), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        object.__setattr__(self, "weights", w)
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.shape != (w.shape[0],):
                raise ValueError(f"bias must have length C={w.shape[0]}, got {b.shape}")
            object.__setattr__(self, "bias", b)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]


def _check_channels(F, head):
    if F.shape[0] != head.dim:
        raise ValueError(
            f"channel mismatch: features have d={F.shape[0]}, head expects d={head.dim}"
        )


def compute_cam(F, head, c):
    """Channel-weighted sum of feature maps for class c.

    Returns the raw signed (h, w) map; no normalization and no bias
    term (a spatially constant offset cannot move the argmax).
    """
    F = validate_feature_map(F)
    _check_channels(F, head)
    if not 0 <= c < head.num_classes:
        raise ValueError(f"class index {c} out of range [0, {head.num_classes})")
    return np.tensordot(head.weights[c], F, axes=1)


def class_scores(F, head):
    """Scores of every class: spatial mean of each class map, plus bias.

    The spatial mean (GAP convention) matches common pretrained heads;
    the spatial *sum* of a class map equals (score - bias) * h * w.
    """
    F = validate_feature_map(F)
    _check_channels(F, head)
    gap = F.mean(axis=(1, 2))
    scores = head.weights @ gap
    if head.bias is not None:
        scores = scores + head.bias
    return scores


def top_k_classes(scores, k):
    """Indices of the k largest scores, descending, ties to lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 1 <= k <= scores.shape[0]:
        raise ValueError(f"k={k} out of range [1, {scores.shape[0]}]")
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:k]]
