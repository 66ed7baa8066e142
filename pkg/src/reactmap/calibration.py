"""Foreground polarity resolution and fusion with the class map.

The EM latents do not say which side carries the foreground; the side
with the greater average probability over the CAM-derived foreground
mask wins. The chosen map is then summed with the class map (both
min-max normalized, sum re-normalized) to suppress stray background
re-activations.
"""

from dataclasses import dataclass

import numpy as np

from reactmap.maps import add_maps, min_max_normalize, validate_mask


@dataclass(frozen=True)
class CalibrationResult:
    chose_fg: bool
    zbar_fg: float
    zbar_bg: float
    calibrated: np.ndarray
    final: np.ndarray


def calibrate(z, cam_fg_mask):
    """Pick the latent side whose mean over the CAM foreground is larger.

    Ties go to the foreground side. The mask must be non-empty (it is
    derived from a normalized non-constant map with the >= rule, which
    always keeps the argmax pixel).
    """
    mask = validate_mask(cam_fg_mask)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("empty calibration mask")
    m = mask.astype(np.float64)
    zbar_fg = float((z.z_fg * m).sum() / count)
    zbar_bg = float((z.z_bg * m).sum() / count)
    chose_fg = zbar_fg >= zbar_bg
    calibrated = z.z_fg if chose_fg else z.z_bg
    return chose_fg, zbar_fg, zbar_bg, calibrated


def final_map(calibrated, cam):
    """Sum of the calibrated map and the class map, each normalized first.

    The two inputs live on incomparable scales (probabilities vs signed
    logits), so both are brought to [0, 1] before summing and the sum
    is normalized again.
    """
    return min_max_normalize(add_maps(min_max_normalize(calibrated), min_max_normalize(cam)))
