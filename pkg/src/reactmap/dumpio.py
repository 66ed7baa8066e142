"""On-disk interchange formats.

Binary formats (all integers little-endian, features float32):

  feature dump  "CRMF": header {magic, version u32, C, d, h, w, count},
                then per record: length-prefixed utf-8 image id, label
                u32, d*h*w float32 channel-major features, flags u32
                (bit0 boxes, bit1 mask, bit2 ranked predictions) and
                the corresponding optional payloads. Masks are stored
                run-length encoded, runs alternating starting with the
                zero run.
  head          "CRMH": magic, version, C, d, has_bias u32, C*d
                float32 weights, then C float32 biases when present.
  map set       "CRMP": magic, version, count, then per record id,
                h, w, h*w float32 values.
  context store "CRMS": see reactmap.context.

Round-trips are lossless and bit-exact for float32 payloads. Parse
failures raise distinct errors carrying the byte offset.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reactmap.cam import ClassifierHead
from reactmap.localization import BoundingBox

DUMP_MAGIC = b"CRMF"
HEAD_MAGIC = b"CRMH"
MAPS_MAGIC = b"CRMP"
FORMAT_VERSION = 1

FLAG_BOXES = 1
FLAG_MASK = 2
FLAG_PREDS = 4


class DumpFormatError(ValueError):
    """Malformed interchange file; offset is the failing byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagicError(DumpFormatError):
    pass


class TruncatedError(DumpFormatError):
    pass


class LabelOverflowError(DumpFormatError):
    pass


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    label: int
    features: np.ndarray  # (d, h, w) float32
    boxes: tuple = ()  # BoundingBox, image coordinates
    mask: np.ndarray | None = None  # (H, W) uint8
    predictions: tuple | None = None  # ranked class indices


@dataclass
class FeatureDump:
    num_classes: int
    dim: int
    height: int
    width: int
    records: list = field(default_factory=list)


def rle_encode(mask):
    """Row-major run lengths, alternating and starting with zeros."""
    flat = np.asarray(mask).ravel().astype(np.uint8)
    runs = []
    current = 0
    count = 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current = 1 - current
            count = 1
    runs.append(count)
    return runs


def rle_decode(runs, shape):
    out = np.zeros(int(np.prod(shape)), dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        out[pos : pos + run] = value
        pos += run
        value = 1 - value
    if pos != out.shape[0]:
        raise ValueError(f"run lengths cover {pos} pixels, mask has {out.shape[0]}")
    return out.reshape(shape)


class _Writer:
    def __init__(self, fh):
        self.fh = fh

    def pack(self, fmt, *vals):
        self.fh.write(struct.pack("<" + fmt, *vals))

    def raw(self, data):
        self.fh.write(data)

    def string(self, s):
        data = s.encode("utf-8")
        self.pack("I", len(data))
        self.raw(data)


class _Reader:
    def __init__(self, data, record_index=None):
        self.data = data
        self.off = 0
        self.record_index = record_index

    def _need(self, n, what):
        if self.off + n > len(self.data):
            where = "" if self.record_index is None else f" in record {self.record_index}"
            raise TruncatedError(f"truncated while reading {what}{where}", self.off)

    def unpack(self, fmt, what):
        n = struct.calcsize("<" + fmt)
        self._need(n, what)
        vals = struct.unpack_from("<" + fmt, self.data, self.off)
        self.off += n
        return vals if len(vals) > 1 else vals[0]

    def raw(self, n, what):
        self._need(n, what)
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def string(self, what):
        n = self.unpack("I", what + " length")
        return self.raw(n, what).decode("utf-8")

    def f32(self, count, what):
        raw = self.raw(4 * count, what)
        return np.frombuffer(raw, dtype="<f4", count=count)


def write_dump(path, dump):
    with open(path, "wb") as fh:
        w = _Writer(fh)
        w.raw(DUMP_MAGIC)
        w.pack(
            "IIIIII",
            FORMAT_VERSION,
            dump.num_classes,
            dump.dim,
            dump.height,
            dump.width,
            len(dump.records),
        )
        for rec in dump.records:
            feats = np.ascontiguousarray(rec.features, dtype="<f4")
            if feats.shape != (dump.dim, dump.height, dump.width):
                raise ValueError(
                    f"{rec.image_id}: features {feats.shape} do not match header "
                    f"({dump.dim}, {dump.height}, {dump.width})"
                )
            if not 0 <= rec.label < dump.num_classes:
                raise ValueError(f"{rec.image_id}: label {rec.label} out of range")
            w.string(rec.image_id)
            w.pack("I", rec.label)
            w.raw(feats.tobytes())
            flags = (
                (FLAG_BOXES if rec.boxes else 0)
                | (FLAG_MASK if rec.mask is not None else 0)
                | (FLAG_PREDS if rec.predictions is not None else 0)
            )
            w.pack("I", flags)
            if rec.boxes:
                w.pack("I", len(rec.boxes))
                for b in rec.boxes:
                    w.pack("iiii", b.x0, b.y0, b.x1, b.y1)
            if rec.mask is not None:
                runs = rle_encode(rec.mask)
                w.pack("III", rec.mask.shape[0], rec.mask.shape[1], len(runs))
                w.raw(np.asarray(runs, dtype="<u4").tobytes())
            if rec.predictions is not None:
                w.pack("I", len(rec.predictions))
                w.raw(np.asarray(rec.predictions, dtype="<u4").tobytes())


def read_dump(path):
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic = r.raw(4, "magic") if len(data) >= 4 else data
    if magic != DUMP_MAGIC:
        raise BadMagicError(f"bad dump magic {bytes(magic)!r}", 0)
    version, C, d, h, w, count = r.unpack("IIIIII", "header")
    if version != FORMAT_VERSION:
        raise DumpFormatError(f"unsupported dump version {version}", 4)
    dump = FeatureDump(num_classes=C, dim=d, height=h, width=w)
    for idx in range(count):
        r.record_index = idx
        image_id = r.string("image id")
        label_off = r.off
        label = r.unpack("I", "label")
        if label >= C:
            raise LabelOverflowError(
                f"label {label} >= num_classes {C} in record {idx}", label_off
            )
        feats = r.f32(d * h * w, "features").reshape(d, h, w)
        flags = r.unpack("I", "flags")
        boxes = ()
        mask = None
        preds = None
        if flags & FLAG_BOXES:
            nboxes = r.unpack("I", "box count")
            boxes = tuple(
                BoundingBox(*r.unpack("iiii", "box")) for _ in range(nboxes)
            )
        if flags & FLAG_MASK:
            mh, mw, nruns = r.unpack("III", "mask header")
            runs = np.frombuffer(r.raw(4 * nruns, "mask runs"), dtype="<u4")
            mask = rle_decode([int(x) for x in runs], (mh, mw))
        if flags & FLAG_PREDS:
            k = r.unpack("I", "prediction count")
            preds = tuple(
                int(x) for x in np.frombuffer(r.raw(4 * k, "predictions"), dtype="<u4")
            )
        dump.records.append(
            ImageRecord(
                image_id=image_id,
                label=int(label),
                features=feats,
                boxes=boxes,
                mask=mask,
                predictions=preds,
            )
        )
    return dump


def write_head(path, head):
    with open(path, "wb") as fh:
        w = _Writer(fh)
        w.raw(HEAD_MAGIC)
        w.pack("III", FORMAT_VERSION, head.num_classes, head.dim)
        w.pack("I", 1 if head.bias is not None else 0)
        w.raw(np.ascontiguousarray(head.weights, dtype="<f4").tobytes())
        if head.bias is not None:
            w.raw(np.ascontiguousarray(head.bias, dtype="<f4").tobytes())


def read_head(path):
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic = r.raw(4, "magic") if len(data) >= 4 else data
    if magic != HEAD_MAGIC:
        raise BadMagicError(f"bad head magic {bytes(magic)!r}", 0)
    version, C, d, has_bias = r.unpack("IIII", "head header")
    if version != FORMAT_VERSION:
        raise DumpFormatError(f"unsupported head version {version}", 4)
    weights = r.f32(C * d, "weights").reshape(C, d).astype(np.float64)
    bias = r.f32(C, "bias").astype(np.float64) if has_bias else None
    return ClassifierHead(weights=weights, bias=bias)


def write_maps(path, named_maps):
    """named_maps: ordered sequence of (image_id, (h, w) array)."""
    named_maps = list(named_maps)
    with open(path, "wb") as fh:
        w = _Writer(fh)
        w.raw(MAPS_MAGIC)
        w.pack("II", FORMAT_VERSION, len(named_maps))
        for image_id, m in named_maps:
            m = np.ascontiguousarray(m, dtype="<f4")
            w.string(image_id)
            w.pack("II", m.shape[0], m.shape[1])
            w.raw(m.tobytes())


def read_maps(path):
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic = r.raw(4, "magic") if len(data) >= 4 else data
    if magic != MAPS_MAGIC:
        raise BadMagicError(f"bad map-set magic {bytes(magic)!r}", 0)
    version, count = r.unpack("II", "map-set header")
    if version != FORMAT_VERSION:
        raise DumpFormatError(f"unsupported map-set version {version}", 4)
    out = []
    for idx in range(count):
        r.record_index = idx
        image_id = r.string("image id")
        h, w = r.unpack("II", "map shape")
        values = r.f32(h * w, "map values").reshape(h, w).astype(np.float64)
        out.append((image_id, values))
    return out


def load_manifest(path):
    """JSON manifest: file paths plus config overrides.

    Relative paths resolve against the manifest's directory. Referenced
    files must exist.
    """
    path = Path(path)
    with open(path) as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, dict):
        raise ValueError(f"{path}: manifest must be a JSON object")
    for key in ("feature_dump", "head", "store"):
        if key in manifest and manifest[key] is not None:
            resolved = (path.parent / manifest[key]).resolve()
            if not resolved.exists():
                raise FileNotFoundError(f"{path}: manifest {key} -> {resolved} does not exist")
            manifest[key] = str(resolved)
    return manifest
