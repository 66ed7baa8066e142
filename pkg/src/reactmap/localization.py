"""Activation map to bounding box conversion and box geometry."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from reactmap.maps import validate_map, validate_mask

# 8-connectivity structuring element
_STRUCTURE = np.ones((3, 3), dtype=np.uint8)


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def scaled(self, factor):
        """Scale coordinates by an integer or real stride factor."""
        return BoundingBox(
            x0=int(round(self.x0 * factor)),
            y0=int(round(self.y0 * factor)),
            x1=int(round(self.x1 * factor)),
            y1=int(round(self.y1 * factor)),
        )


def connected_components(mask):
    """8-connected components of the 1-pixels, each as an (n, 2) array
    of (row, col) pairs, ordered by first pixel in row-major scan order."""
    mask = validate_mask(mask)
    labels, num = ndimage.label(mask, structure=_STRUCTURE)
    if num == 0:
        return []
    flat = labels.ravel()
    # first row-major occurrence of each label fixes the output order
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq != 0
    order = uniq[keep][np.argsort(first[keep], kind="stable")]
    comps = []
    for lab in order:
        rows, cols = np.nonzero(labels == lab)
        comps.append(np.column_stack([rows, cols]))
    return comps


def _tight_box(pixels):
    rows = pixels[:, 0]
    cols = pixels[:, 1]
    return BoundingBox(
        x0=int(cols.min()), y0=int(rows.min()), x1=int(cols.max()) + 1, y1=int(rows.max()) + 1
    )


def extract_box(m, tau, box_mode="largest_cc"):
    """Tight box of the thresholded map, or None when nothing survives.

    largest_cc keeps the biggest 8-connected component (ties broken by
    scan order); union boxes the whole thresholded mask.
    """
    m = validate_map(m)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    mask = (m >= tau).astype(np.uint8)
    if mask.sum() == 0:
        return None
    if box_mode == "union":
        rows, cols = np.nonzero(mask)
        return _tight_box(np.column_stack([rows, cols]))
    if box_mode != "largest_cc":
        raise ValueError(f"unknown box_mode {box_mode!r}")
    comps = connected_components(mask)
    best = max(comps, key=lambda p: p.shape[0])
    # max() keeps the earliest component on ties because it only replaces
    # on strictly greater size
    return _tight_box(best)


def iou(a, b):
    """Intersection over union of two half-open boxes."""
    ix = max(0, min(a.x1, b.x1) - max(a.x0, b.x0))
    iy = max(0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union
