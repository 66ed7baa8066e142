"""Inference-stage EM soft clustering over pixel features.

Each pixel feature is modeled as a two-component mixture whose base
models score similarity to a foreground and a background embedding via
exp(v . x / sigma). The E-step assigns per-pixel soft fg/bg labels,
the M-step re-estimates the embeddings as soft-weighted feature means
and the mixing weights as effective pixel fractions. Embeddings are
copied out of the context store per image, so runs over different
images are independent and freely parallelizable.
"""

import math
from dataclasses import dataclass

import numpy as np

from reactmap import _kernels
from reactmap.maps import validate_feature_map

_EPS_WEIGHT = 1e-8


@dataclass(frozen=True)
class EmConfig:
    sigma: float = 8.0
    iterations: int = 2
    a_init: float = 0.5
    l2_normalize_features: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.0 < self.a_init < 1.0:
            raise ValueError(f"a_init must be in (0, 1), got {self.a_init}")


@dataclass(frozen=True)
class MixtureParams:
    a_fg: float
    a_bg: float
    v_fg: np.ndarray
    v_bg: np.ndarray

    def __post_init__(self):
        if abs(self.a_fg + self.a_bg - 1.0) > 1e-6:
            raise ValueError(f"mixing weights must sum to 1, got {self.a_fg + self.a_bg}")
        object.__setattr__(self, "v_fg", np.asarray(self.v_fg, dtype=np.float64))
        object.__setattr__(self, "v_bg", np.asarray(self.v_bg, dtype=np.float64))


@dataclass(frozen=True)
class LatentMaps:
    z_fg: np.ndarray  # (h, w), per-pixel probability of foreground
    z_bg: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z_fg", np.asarray(self.z_fg, dtype=np.float64))
        object.__setattr__(self, "z_bg", np.asarray(self.z_bg, dtype=np.float64))
        if self.z_fg.shape != self.z_bg.shape:
            raise ValueError("latent map shapes disagree")


def _pixel_matrix(F, l2_normalize=False):
    F = validate_feature_map(F)
    d = F.shape[0]
    X = np.ascontiguousarray(F.reshape(d, -1).T)
    if l2_normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    return X


def _safe_log(a):
    return math.log(a) if a > 0 else -math.inf


def base_similarity(v, F, sigma):
    """Similarity map exp(v . F[:, i, j] / sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    F = validate_feature_map(F)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (F.shape[0],):
        raise ValueError(f"embedding dim {v.shape} does not match d={F.shape[0]}")
    return np.exp(np.tensordot(v, F, axes=1) / sigma)


def e_step(F, params, sigma, l2_normalize_features=False):
    """Per-pixel posterior fg/bg assignment under the current parameters.

    Computed in the log domain with per-pixel max-logit subtraction;
    the two maps sum to 1 at every pixel.
    """
    X = _pixel_matrix(F, l2_normalize_features)
    h, w = F.shape[1], F.shape[2]
    z_fg = _kernels.e_step_core(
        X, params.v_fg, params.v_bg, _safe_log(params.a_fg), _safe_log(params.a_bg), float(sigma)
    ).reshape(h, w)
    return LatentMaps(z_fg=z_fg, z_bg=1.0 - z_fg)


def m_step(F, z, prev=None, l2_normalize_features=False):
    """Re-estimate embeddings and mixing weights from soft assignments.

    A side whose total assignment mass is exactly zero keeps the
    previous embedding (prev must then be supplied) and gets weight
    1e-8, renormalized against the other side.
    """
    X = _pixel_matrix(F, l2_normalize_features)
    z_flat = np.ascontiguousarray(z.z_fg.reshape(-1))
    if z_flat.shape[0] != X.shape[0]:
        raise ValueError("latent maps do not match feature grid")
    sum_fg_v, sum_bg_v, s_fg, s_bg = _kernels.m_step_core(X, z_flat)
    n = X.shape[0]
    a_fg, a_bg = s_fg / n, s_bg / n
    if s_fg > 0:
        v_fg = sum_fg_v / s_fg
    else:
        if prev is None:
            raise ValueError("all-zero foreground assignment and no previous embedding")
        v_fg = prev.v_fg
        a_fg = _EPS_WEIGHT
    if s_bg > 0:
        v_bg = sum_bg_v / s_bg
    else:
        if prev is None:
            raise ValueError("all-zero background assignment and no previous embedding")
        v_bg = prev.v_bg
        a_bg = _EPS_WEIGHT
    total = a_fg + a_bg
    return MixtureParams(a_fg=a_fg / total, a_bg=a_bg / total, v_fg=v_fg, v_bg=v_bg)


def log_likelihood(F, params, sigma, l2_normalize_features=False):
    """Mixture log-likelihood of all pixels, evaluated in the log domain."""
    X = _pixel_matrix(F, l2_normalize_features)
    return float(
        _kernels.log_likelihood_core(
            X, params.v_fg, params.v_bg, _safe_log(params.a_fg), _safe_log(params.a_bg), float(sigma)
        )
    )


def run_em(F, store, c, cfg=EmConfig()):
    """Alternate E- and M-steps for cfg.iterations, seeded from the store.

    Returns (latents, params) where latents come from the final E-step.
    With iterations=0 no re-activation happens and latents is None;
    callers fall back to the plain class activation map.
    """
    if not 0 <= c < store.num_classes:
        raise ValueError(f"class index {c} out of range [0, {store.num_classes})")
    params = MixtureParams(
        a_fg=cfg.a_init,
        a_bg=1.0 - cfg.a_init,
        v_fg=store.v_fg[c].copy(),
        v_bg=store.v_bg[c].copy(),
    )
    z = None
    for _ in range(cfg.iterations):
        z = e_step(F, params, cfg.sigma, cfg.l2_normalize_features)
        params = m_step(F, z, prev=params, l2_normalize_features=cfg.l2_normalize_features)
    return z, params
