"""Class-specific foreground/background context embeddings.

The store holds one foreground and one background d-vector per class.
During the learning pass each sample's class map is normalized,
thresholded at a fraction of its maximum, and the masked spatial means
of the features are folded into the class embeddings with a momentum
update: v <- lam * v + (1 - lam) * masked_mean.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from reactmap.cam import compute_cam
from reactmap.maps import min_max_normalize, threshold_fg_bg, validate_feature_map

STORE_MAGIC = b"CRMS"
STORE_VERSION = 1


@dataclass(frozen=True)
class ContextStore:
    v_fg: np.ndarray  # (C, d)
    v_bg: np.ndarray  # (C, d)
    lam: float
    seed: int

    def __post_init__(self):
        fg = np.asarray(self.v_fg, dtype=np.float64)
        bg = np.asarray(self.v_bg, dtype=np.float64)
        if fg.ndim != 2 or fg.shape != bg.shape:
            raise ValueError(f"embedding shapes disagree: {fg.shape} vs {bg.shape}")
        if not (np.all(np.isfinite(fg)) and np.all(np.isfinite(bg))):
            raise ValueError("embeddings contain non-finite values")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"momentum coefficient must be in [0, 1], got {self.lam}")
        object.__setattr__(self, "v_fg", fg)
        object.__setattr__(self, "v_bg", bg)

    @property
    def num_classes(self):
        return self.v_fg.shape[0]

    @property
    def dim(self):
        return self.v_fg.shape[1]


def init_store(num_classes, dim, seed, lam=0.8):
    """Fresh store with standard-normal embeddings, deterministic in seed."""
    if num_classes < 1 or dim < 1:
        raise ValueError("num_classes and dim must be >= 1")
    rng = np.random.default_rng(seed)
    v_fg = rng.standard_normal((num_classes, dim))
    v_bg = rng.standard_normal((num_classes, dim))
    return ContextStore(v_fg=v_fg, v_bg=v_bg, lam=lam, seed=seed)


def masked_mean(F, mask):
    """Spatial mean of feature vectors where mask == 1, or None if empty."""
    count = int(mask.sum())
    if count == 0:
        return None
    return np.tensordot(F, mask.astype(np.float64), axes=([1, 2], [0, 1])) / count


def update_embeddings(store, F, m_fg, m_bg, c):
    """One momentum update of class c from masked feature means.

    A side whose mask is empty is skipped (the update divides by the
    mask's pixel count). Other classes are untouched.
    """
    F = validate_feature_map(F)
    if not 0 <= c < store.num_classes:
        raise ValueError(f"class index {c} out of range [0, {store.num_classes})")
    if F.shape[0] != store.dim:
        raise ValueError(f"channel mismatch: d={F.shape[0]} vs store d={store.dim}")
    lam = store.lam
    v_fg = store.v_fg.copy()
    v_bg = store.v_bg.copy()
    for target, mask in ((v_fg, m_fg), (v_bg, m_bg)):
        mu = masked_mean(F, mask)
        if mu is not None:
            target[c] = lam * target[c] + (1.0 - lam) * mu
    return replace(store, v_fg=v_fg, v_bg=v_bg)


def embedding_pass(store, head, samples, delta_frac=0.2, epochs=1):
    """Run the momentum update over an ordered (features, label) sequence.

    Per sample: class map for the ground-truth label, min-max
    normalized, split into fg/bg at delta_frac of the maximum, then one
    momentum update. Deterministic for a fixed sequence order.
    """
    lam = store.lam
    v_fg = store.v_fg.copy()
    v_bg = store.v_bg.copy()
    for _ in range(epochs):
        for idx, (F, label) in enumerate(samples):
            try:
                cam = compute_cam(F, head, label)
                m_fg, m_bg = threshold_fg_bg(min_max_normalize(cam), delta_frac)
                for target, mask in ((v_fg, m_fg), (v_bg, m_bg)):
                    mu = masked_mean(np.asarray(F, dtype=np.float64), mask)
                    if mu is not None:
                        target[label] = lam * target[label] + (1.0 - lam) * mu
            except ValueError as exc:
                raise ValueError(f"sample {idx}: {exc}") from exc
    return replace(store, v_fg=v_fg, v_bg=v_bg)


def write_store(path, store):
    """Serialize a store: magic, version, C, d, lam, seed, fg rows, bg rows."""
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<IIIfQ", STORE_VERSION, store.num_classes, store.dim,
                             store.lam, store.seed))
        fh.write(store.v_fg.astype("<f4").tobytes())
        fh.write(store.v_bg.astype("<f4").tobytes())


def read_store(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != STORE_MAGIC:
        raise ValueError(f"bad store magic {data[:4]!r} at offset 0")
    version, C, d, lam, seed = struct.unpack_from("<IIIfQ", data, 4)
    if version != STORE_VERSION:
        raise ValueError(f"unsupported store version {version}")
    need = 4 + struct.calcsize("<IIIfQ") + 2 * C * d * 4
    if len(data) < need:
        raise ValueError(f"truncated store file: {len(data)} bytes, need {need}")
    off = 4 + struct.calcsize("<IIIfQ")
    flat = np.frombuffer(data, dtype="<f4", count=2 * C * d, offset=off)
    v_fg = flat[: C * d].reshape(C, d).astype(np.float64)
    v_bg = flat[C * d :].reshape(C, d).astype(np.float64)
    return ContextStore(v_fg=v_fg, v_bg=v_bg, lam=float(lam), seed=int(seed))
