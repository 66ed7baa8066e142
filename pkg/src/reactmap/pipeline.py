"""Per-image glue: class map -> EM re-activation -> calibrated final map."""

from dataclasses import dataclass

import numpy as np

from reactmap.calibration import CalibrationResult, calibrate, final_map
from reactmap.cam import compute_cam
from reactmap.em import EmConfig, run_em
from reactmap.maps import min_max_normalize, threshold_fg_bg


@dataclass(frozen=True)
class ReactivationResult:
    cam: np.ndarray  # raw signed class map
    final: np.ndarray  # normalized final localization map
    calibration: CalibrationResult | None  # None when EM was skipped


def reactivate_image(F, head, store, c, cfg=EmConfig(), delta_frac=0.2):
    """Full single-image pass for class c.

    With iterations=0 (or a constant class map, which gives no usable
    foreground mask) the normalized class map is returned unchanged.
    """
    cam = compute_cam(F, head, c)
    norm_cam = min_max_normalize(cam)
    if cfg.iterations == 0 or cam.max() == cam.min():
        return ReactivationResult(cam=cam, final=norm_cam, calibration=None)
    z, _params = run_em(F, store, c, cfg)
    fg_mask, _ = threshold_fg_bg(norm_cam, delta_frac)
    chose_fg, zbar_fg, zbar_bg, calibrated = calibrate(z, fg_mask)
    fused = final_map(calibrated, cam)
    result = CalibrationResult(
        chose_fg=chose_fg,
        zbar_fg=zbar_fg,
        zbar_bg=zbar_bg,
        calibrated=calibrated,
        final=fused,
    )
    return ReactivationResult(cam=cam, final=fused, calibration=result)
