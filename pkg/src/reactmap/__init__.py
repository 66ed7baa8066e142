"""Re-activation mapping for weakly supervised object localization.

Turns backbone feature maps plus classifier weights into localization
maps: plain channel-weighted activation maps, class-specific context
embeddings maintained with momentum updates, an EM soft-clustering pass
that re-activates the full object extent, and standard WSOL metrics
(GT-Known, Top-k Loc, MaxBoxAccV2, PxAP).
"""

from reactmap.maps import min_max_normalize, threshold_fg_bg, add_maps
from reactmap.cam import ClassifierHead, compute_cam, class_scores, top_k_classes
from reactmap.context import ContextStore, init_store, update_embeddings, embedding_pass
from reactmap.em import (
    EmConfig,
    MixtureParams,
    LatentMaps,
    base_similarity,
    e_step,
    m_step,
    run_em,
    log_likelihood,
)
from reactmap.calibration import CalibrationResult, calibrate, final_map
from reactmap.localization import BoundingBox, connected_components, extract_box, iou
from reactmap.pipeline import reactivate_image

__version__ = "0.1.0"

__all__ = [
    "min_max_normalize",
    "threshold_fg_bg",
    "add_maps",
    "ClassifierHead",
    "compute_cam",
    "class_scores",
    "top_k_classes",
    "ContextStore",
    "init_store",
    "update_embeddings",
    "embedding_pass",
    "EmConfig",
    "MixtureParams",
    "LatentMaps",
    "base_similarity",
    "e_step",
    "m_step",
    "run_em",
    "log_likelihood",
    "CalibrationResult",
    "calibrate",
    "final_map",
    "BoundingBox",
    "connected_components",
    "extract_box",
    "iou",
    "reactivate_image",
]
