"""WSOL evaluation: GT-Known / Top-k localization, MaxBoxAccV2, PxAP,
and per-threshold accuracy curves.

Maps arrive at feature resolution; predicted boxes are scaled to image
coordinates with the feature stride, and pixel metrics upscale the map
to the ground-truth mask resolution (nearest-neighbor by default, so
scores stay a finite set and monotone transforms leave PxAP unchanged).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from reactmap.localization import BoundingBox, extract_box, iou
from reactmap.maps import min_max_normalize, validate_map

IOU_LEVELS = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    class_label: int
    boxes: tuple = ()  # BoundingBox in image coordinates
    mask: np.ndarray | None = None  # (H, W) {0,1} at image resolution

    def __post_init__(self):
        if not self.boxes and self.mask is None:
            raise ValueError(f"{self.image_id}: ground truth needs boxes or a mask")
        object.__setattr__(self, "boxes", tuple(self.boxes))


def default_tau_grid():
    """0.00, 0.01, ..., 1.00."""
    return [round(t * 0.01, 2) for t in range(101)]


def validate_tau_grid(taus):
    taus = [float(t) for t in taus]
    if any(not 0.0 <= t <= 1.0 for t in taus):
        raise ValueError("thresholds must lie in [0, 1]")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("threshold grid must be strictly ascending")
    return taus


@dataclass
class EvalReport:
    scalars: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)  # name -> list of (tau, acc)
    per_image: list = field(default_factory=list)


def _best_iou(m, gt, tau, stride, box_mode):
    box = extract_box(m, tau, box_mode=box_mode)
    if box is None:
        return 0.0
    if stride != 1:
        box = box.scaled(stride)
    return max((iou(box, g) for g in gt.boxes), default=0.0)


def _check_aligned(maps, gts):
    if len(maps) != len(gts):
        raise ValueError(f"{len(maps)} maps for {len(gts)} ground-truth records")


def gt_known(maps, gts, tau=0.2, stride=1, box_mode="largest_cc"):
    """Fraction of images whose box at tau reaches IoU >= 0.5 with any
    ground-truth box."""
    _check_aligned(maps, gts)
    hits = sum(
        _best_iou(min_max_normalize(m), gt, tau, stride, box_mode) >= 0.5
        for m, gt in zip(maps, gts)
    )
    return hits / len(maps)


def topk_loc(maps, gts, predictions, k, tau=0.2, stride=1, box_mode="largest_cc"):
    """Fraction of images with the true class in the top-k predictions
    AND a correct box (IoU >= 0.5) at tau."""
    _check_aligned(maps, gts)
    hits = 0
    for m, gt, preds in zip(maps, gts, predictions):
        if len(preds) < k:
            raise ValueError(f"{gt.image_id}: ranked list shorter than k={k}")
        if gt.class_label not in preds[:k]:
            continue
        if _best_iou(min_max_normalize(m), gt, tau, stride, box_mode) >= 0.5:
            hits += 1
    return hits / len(maps)


def _iou_table(maps, gts, taus, stride, box_mode):
    """best IoU per (image, tau)."""
    table = np.zeros((len(maps), len(taus)))
    for i, (m, gt) in enumerate(zip(maps, gts)):
        norm = min_max_normalize(m)
        for j, tau in enumerate(taus):
            table[i, j] = _best_iou(norm, gt, tau, stride, box_mode)
    return table


def max_box_acc_v2(maps, gts, taus=None, stride=1, box_mode="largest_cc"):
    """Box accuracy maximized over the threshold grid, averaged over the
    IoU levels 0.3 / 0.5 / 0.7."""
    _check_aligned(maps, gts)
    taus = validate_tau_grid(taus if taus is not None else default_tau_grid())
    if not taus:
        raise ValueError("empty threshold grid")
    table = _iou_table(maps, gts, taus, stride, box_mode)
    per_level = [float((table >= delta).mean(axis=0).max()) for delta in IOU_LEVELS]
    return sum(per_level) / len(per_level)


def box_acc_curve(maps, gts, taus, delta=0.5, stride=1, box_mode="largest_cc"):
    """Per-threshold box accuracy series for plotting / robustness checks."""
    _check_aligned(maps, gts)
    taus = validate_tau_grid(taus)
    if not taus:
        return []
    table = _iou_table(maps, gts, taus, stride, box_mode)
    acc = (table >= delta).mean(axis=0)
    return list(zip(taus, acc.tolist()))


def upscale_map(m, out_shape, mode="nearest"):
    """Resize a map to mask resolution."""
    m = validate_map(m)
    H, W = out_shape
    h, w = m.shape
    if (h, w) == (H, W):
        return m
    if mode == "nearest":
        rows = np.minimum((((np.arange(H) + 0.5) * h) // H).astype(int), h - 1)
        cols = np.minimum((((np.arange(W) + 0.5) * w) // W).astype(int), w - 1)
        return m[np.ix_(rows, cols)]
    if mode == "bilinear":
        return ndimage.zoom(m, (H / h, W / w), order=1, grid_mode=True, mode="nearest")
    raise ValueError(f"unknown upsample mode {mode!r}")


def px_ap(maps, gts, upsample="nearest"):
    """Area under the pixel precision-recall curve over the dataset.

    Thresholds sweep every distinct score value; AP accumulates
    precision at each recall step.
    """
    _check_aligned(maps, gts)
    scores = []
    labels = []
    for m, gt in zip(maps, gts):
        if gt.mask is None:
            raise ValueError(f"{gt.image_id}: pixel metric needs a ground-truth mask")
        up = upscale_map(min_max_normalize(m), gt.mask.shape, mode=upsample)
        scores.append(up.ravel())
        labels.append(gt.mask.ravel().astype(bool))
    scores = np.concatenate(scores)
    labels = np.concatenate(labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("no positive pixels in the dataset")
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    labels = labels[order]
    tp = np.cumsum(labels)
    fp = np.cumsum(~labels)
    # keep only the last entry of each distinct score (threshold boundary)
    boundary = np.append(scores[1:] != scores[:-1], True)
    tp = tp[boundary].astype(np.float64)
    fp = fp[boundary].astype(np.float64)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def write_report(path, report):
    """key=value scalars, one per line, keys sorted for reproducibility."""
    with open(path, "w") as fh:
        for key in sorted(report.scalars):
            fh.write(f"{key}={report.scalars[key]:.6f}\n")


def write_curve(path, curve):
    with open(path, "w") as fh:
        for tau, acc in curve:
            fh.write(f"{tau:.4f} {acc:.6f}\n")


def write_pgm(path, m):
    """8-bit grayscale portable graymap (P5) of a normalized map."""
    m = min_max_normalize(m)
    gray = np.round(m * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode())
        fh.write(gray.tobytes())
