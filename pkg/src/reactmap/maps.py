"""Dense-grid map algebra shared by every pipeline stage.

Feature maps are float arrays of shape (d, h, w), activation maps are
(h, w) float arrays, binary masks are (h, w) uint8 arrays with values
in {0, 1}. Everything here is a pure function on immutable inputs.
"""

import numpy as np


def validate_feature_map(F):
    """Check a (d, h, w) feature tensor: 3-d, non-empty, finite."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 3:
        raise ValueError(f"feature map must be (d, h, w), got shape {F.shape}")
    if min(F.shape) < 1:
        raise ValueError(f"feature map dimensions must be >= 1, got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("feature map contains non-finite values")
    return F


def validate_map(m):
    """Check an (h, w) activation map: 2-d, non-empty, finite."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"activation map must be (h, w), got shape {m.shape}")
    if min(m.shape) < 1:
        raise ValueError(f"activation map dimensions must be >= 1, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("activation map contains non-finite values")
    return m


def validate_mask(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be (h, w), got shape {mask.shape}")
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError("mask values must be exactly 0 or 1")
    return mask.astype(np.uint8)


def min_max_normalize(m):
    """Rescale a map affinely to [0, 1].

    A constant map has no usable range and maps to all zeros (treated
    as all-background rather than raising).
    """
    m = validate_map(m)
    lo = m.min()
    hi = m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def threshold_fg_bg(m, delta):
    """Split a normalized map into (fg, bg) one-hot masks at delta.

    Foreground is m >= delta; background is its complement, so the two
    masks always partition the grid.
    """
    m = validate_map(m)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    fg = (m >= delta).astype(np.uint8)
    return fg, (1 - fg).astype(np.uint8)


def add_maps(a, b):
    """Elementwise sum of two same-shaped maps."""
    a = validate_map(a)
    b = validate_map(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a + b
