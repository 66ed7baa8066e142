"""Synthetic fixture generation and brute-force clustering oracles.

Each fixture is a feature grid containing one object. Object pixels
split into a small discriminative "part" and the remaining "body"; the
classifier weight for a class aligns with the part direction (plus a
weak body leak), so the plain class activation map peaks on the part
while the full object stays linearly separable from the background in
feature space. Background prototypes rotate per image away from the
class-level background direction, which makes a single shared
background embedding imperfect and leaves room for the image-level EM
refinement to help.
"""

from dataclasses import dataclass

import numpy as np

from reactmap.cam import ClassifierHead, class_scores, top_k_classes
from reactmap.em import LatentMaps
from reactmap.localization import BoundingBox


@dataclass(frozen=True)
class FixtureSpec:
    num_classes: int = 10
    dim: int = 16
    height: int = 28
    width: int = 28
    shape: str = "rect"  # "rect" or "ellipse"
    part_frac: float = 0.25
    noise: float = 0.03  # fraction of the minimum prototype separation
    seed: int = 7
    feature_scale: float = 6.0
    body_gain: float = 0.05  # weak body response of the classifier weight
    bg_jitter_max: float = 1.3  # per-image rotation of the background prototype
    min_size_frac: float = 0.4
    max_size_frac: float = 0.65

    def __post_init__(self):
        if not 0.0 < self.part_frac <= 1.0:
            raise ValueError(f"part_frac must be in (0, 1], got {self.part_frac}")
        if self.shape not in ("rect", "ellipse"):
            raise ValueError(f"shape must be 'rect' or 'ellipse', got {self.shape!r}")
        if self.num_classes < 1 or self.dim < 3:
            raise ValueError("need num_classes >= 1 and dim >= 3")
        if int(self.max_size_frac * min(self.height, self.width)) < 2:
            raise ValueError("grid too small for the configured object sizes")


@dataclass(frozen=True)
class Fixture:
    image_id: str
    features: np.ndarray  # (d, h, w)
    label: int
    gt_mask: np.ndarray  # (h, w) uint8
    gt_box: BoundingBox
    predictions: tuple  # ranked class indices from the shared head


def default_suite_spec(**overrides):
    """Suite used by the acceptance checks: 10 classes, d=16, 28x28."""
    return FixtureSpec(**overrides)


DEFAULT_SUITE_SIZE = 200  # 20 images per class


def _unit_prototypes(rng, num_classes, dim, max_cos=0.5, max_tries=10000):
    """Per-class (object, part-discriminant, background) unit directions.

    Each class triple is exactly orthonormal (the background and the
    discriminative direction must not leak into each other's responses);
    across classes a minimum pairwise angle is enforced by rejection.
    """
    protos = []
    for _ in range(num_classes):
        for _ in range(max_tries):
            cand = rng.standard_normal((3, dim))
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            q, _ = np.linalg.qr(cand.T)
            # keep each original orientation
            for i in range(3):
                if q[:, i] @ cand[i] < 0:
                    q[:, i] = -q[:, i]
            triple = q.T
            if all(abs(t @ p) <= max_cos for t in triple for p in protos):
                protos.extend(triple)
                break
        else:
            raise RuntimeError("could not draw separated prototypes; raise dim or max_cos")
    return np.array(protos)


def _object_masks(rng, spec):
    """Random object mask, its tight box, and the part sub-mask."""
    h, w = spec.height, spec.width
    oh = int(rng.integers(int(spec.min_size_frac * h), int(spec.max_size_frac * h) + 1))
    ow = int(rng.integers(int(spec.min_size_frac * w), int(spec.max_size_frac * w) + 1))
    oh, ow = max(oh, 2), max(ow, 2)
    top = int(rng.integers(0, h - oh + 1))
    left = int(rng.integers(0, w - ow + 1))
    obj = np.zeros((h, w), dtype=np.uint8)
    if spec.shape == "rect":
        obj[top : top + oh, left : left + ow] = 1
    else:
        yy, xx = np.mgrid[0:h, 0:w]
        cy, cx = top + (oh - 1) / 2, left + (ow - 1) / 2
        obj[((yy - cy) / (oh / 2)) ** 2 + ((xx - cx) / (ow / 2)) ** 2 <= 1.0] = 1
        if obj.sum() == 0:
            obj[top : top + oh, left : left + ow] = 1
    # part anchored at a random corner of the object box
    ph = max(int(round(oh * np.sqrt(spec.part_frac))), 1)
    pw = max(int(round(ow * np.sqrt(spec.part_frac))), 1)
    corner = int(rng.integers(0, 4))
    r0 = top if corner in (0, 1) else top + oh - ph
    c0 = left if corner in (0, 2) else left + ow - pw
    part = np.zeros((h, w), dtype=np.uint8)
    part[r0 : r0 + ph, c0 : c0 + pw] = 1
    part &= obj
    if part.sum() == 0:
        rows, cols = np.nonzero(obj)
        part[rows[0], cols[0]] = 1
    rows, cols = np.nonzero(obj)
    box = BoundingBox(
        x0=int(cols.min()), y0=int(rows.min()), x1=int(cols.max()) + 1, y1=int(rows.max()) + 1
    )
    return obj, part, box


def generate(spec, n=DEFAULT_SUITE_SIZE):
    """n fixtures (class of image i is i mod C) and the shared head.

    Bit-reproducible for a fixed (spec, n): a single seeded generator
    drives every draw in a fixed order.
    """
    rng = np.random.default_rng(spec.seed)
    C, d, s = spec.num_classes, spec.dim, spec.feature_scale
    protos = _unit_prototypes(rng, C, d)
    u_obj = protos[0::3]
    u_disc = protos[1::3]
    u_bg = protos[2::3]

    scaled = protos * s
    dists = np.linalg.norm(scaled[:, None, :] - scaled[None, :, :], axis=-1)
    separation = dists[~np.eye(len(scaled), dtype=bool)].min() if len(scaled) > 1 else s
    noise_std = spec.noise * separation

    weights = u_disc + spec.body_gain * u_obj
    head = ClassifierHead(weights=weights)

    part_dir = (u_obj + u_disc) / np.linalg.norm(u_obj + u_disc, axis=1, keepdims=True)

    fixtures = []
    for i in range(n):
        c = i % C
        obj, part, box = _object_masks(rng, spec)
        body = (obj & ~part).astype(bool)
        # rotate the background prototype inside the subspace orthogonal
        # to the object and part directions: the class-level background
        # embedding is then slightly wrong for every individual image,
        # without ever drifting toward the foreground cluster
        beta = float(rng.uniform(0.0, spec.bg_jitter_max))
        g = rng.standard_normal(d)
        for basis in (u_obj[c], u_disc[c]):
            g -= (g @ basis) * basis
        g /= np.linalg.norm(g)
        bg_dir = (1.0 - beta) * u_bg[c] + beta * g
        bg_dir /= np.linalg.norm(bg_dir)

        F = np.empty((d, spec.height, spec.width))
        F[:, :, :] = (s * bg_dir)[:, None, None]
        F[:, body] = (s * u_obj[c])[:, None]
        F[:, part.astype(bool)] = (s * part_dir[c])[:, None]
        if noise_std > 0:
            F += rng.normal(0.0, noise_std, size=F.shape)

        preds = tuple(top_k_classes(class_scores(F, head), min(5, C)))
        fixtures.append(
            Fixture(
                image_id=f"img{i:05d}",
                features=F,
                label=c,
                gt_mask=obj,
                gt_box=box,
                predictions=preds,
            )
        )
    return fixtures, head


def oracle_cluster(F, gt_mask, sigma=8.0):
    """Cheating estimator: exact masked means plus the direct posterior.

    Independent of the EM implementation; used to check that EM
    approaches the ground-truth clustering on easy fixtures.
    """
    F = np.asarray(F, dtype=np.float64)
    fg = np.asarray(gt_mask).astype(bool)
    if fg.all() or not fg.any():
        raise ValueError("oracle clustering needs both foreground and background pixels")
    d = F.shape[0]
    X = F.reshape(d, -1).T
    flat = fg.ravel()
    mean_fg = X[flat].mean(axis=0)
    mean_bg = X[~flat].mean(axis=0)
    # posterior with equal mixing weights, written out directly
    margin = (X @ mean_fg - X @ mean_bg) / sigma
    z_fg = (1.0 / (1.0 + np.exp(-margin))).reshape(F.shape[1], F.shape[2])
    return mean_fg, mean_bg, LatentMaps(z_fg=z_fg, z_bg=1.0 - z_fg)
