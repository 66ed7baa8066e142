"""Run a backbone over a dataset and write the interchange files.

Preprocessing is the deterministic evaluation transform: resize the
shorter side, center-crop to the working resolution, normalize with the
ImageNet statistics. Ground-truth boxes go through the same geometry.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from reactmap.cam import top_k_classes
from reactmap.dumpio import FeatureDump, ImageRecord, write_dump, write_head
from reactmap.cam import ClassifierHead
from reactmap.localization import BoundingBox

from featexport.backbones import build_adapter

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass
class ExportJob:
    dataset: object  # featexport.datasets.Dataset
    out: Path
    backbone: str = "resnet50"
    pretrained: bool = False
    resolution: int = 0  # 0 -> backbone default (224, 299 for inception)
    resize_factor: float = 256 / 224  # shorter side before the center crop
    batch_size: int = 8
    top_k: int = 5
    head_weights: Path | None = None  # optional .npz with weights/bias
    seed: int = 0


def _preprocess(img, resize_side, resolution):
    w, h = img.size
    scale = resize_side / min(w, h)
    new_w, new_h = round(w * scale), round(h * scale)
    img = img.convert("RGB").resize((new_w, new_h), Image.BILINEAR)
    left = (new_w - resolution) // 2
    top = (new_h - resolution) // 2
    img = img.crop((left, top, left + resolution, top + resolution))
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - _IMAGENET_MEAN) / _IMAGENET_STD
    return arr.transpose(2, 0, 1), (scale, left, top)


def transform_box(box, geometry, resolution):
    """Map an original-coordinates (x0, y0, x1, y1) box through the
    resize/crop; returns None when nothing survives the crop."""
    scale, left, top = geometry
    x0 = max(0, min(resolution, round(box[0] * scale - left)))
    y0 = max(0, min(resolution, round(box[1] * scale - top)))
    x1 = max(0, min(resolution, round(box[2] * scale - left)))
    y1 = max(0, min(resolution, round(box[3] * scale - top)))
    if x1 <= x0 or y1 <= y0:
        return None
    return BoundingBox(x0=int(x0), y0=int(y0), x1=int(x1), y1=int(y1))


def _load_head_override(path):
    if path is None:
        return None
    data = np.load(path)
    return {"weights": data["weights"], "bias": data["bias"] if "bias" in data else None}


def export(job):
    """Write <out>.crmf, <out>.crmh and <out>.json; returns their paths."""
    adapter = build_adapter(
        job.backbone,
        pretrained=job.pretrained,
        head_override=_load_head_override(job.head_weights),
        seed=job.seed,
    )
    resolution = job.resolution or adapter.default_resolution
    resize_side = round(resolution * job.resize_factor)
    num_classes = adapter.weights.shape[0]
    if job.dataset.num_classes > num_classes:
        raise ValueError(
            f"dataset has {job.dataset.num_classes} classes, head only {num_classes}"
        )
    head = ClassifierHead(weights=adapter.weights, bias=adapter.bias)

    records = []
    feat_shape = None
    samples = list(job.dataset.samples)
    with torch.no_grad():
        for start in range(0, len(samples), job.batch_size):
            chunk = samples[start : start + job.batch_size]
            arrays = []
            geoms = []
            for sample in chunk:
                arr, geom = _preprocess(Image.open(sample.path), resize_side, resolution)
                arrays.append(arr)
                geoms.append(geom)
            feats = adapter.features(torch.from_numpy(np.stack(arrays))).numpy()
            if feat_shape is None:
                feat_shape = feats.shape[1:]
                if feat_shape[0] != adapter.dim:
                    raise ValueError(
                        f"hooked layer produced d={feat_shape[0]}, declared {adapter.dim}"
                    )
            for sample, F, geom in zip(chunk, feats, geoms):
                gap = F.reshape(F.shape[0], -1).mean(axis=1)
                logits = adapter.weights.astype(np.float64) @ gap.astype(np.float64)
                if adapter.bias is not None:
                    logits = logits + adapter.bias
                preds = tuple(top_k_classes(logits, min(job.top_k, num_classes)))
                boxes = tuple(
                    b
                    for b in (transform_box(box, geom, resolution) for box in sample.boxes)
                    if b is not None
                )
                records.append(
                    ImageRecord(
                        image_id=sample.image_id,
                        label=sample.label,
                        features=F.astype(np.float32),
                        boxes=boxes,
                        predictions=preds,
                    )
                )

    d, fh, fw = feat_shape
    dump = FeatureDump(num_classes=num_classes, dim=d, height=fh, width=fw, records=records)
    out = Path(job.out)
    dump_path = out.with_suffix(".crmf")
    head_path = out.with_suffix(".crmh")
    manifest_path = out.with_suffix(".json")
    write_dump(dump_path, dump)
    write_head(head_path, head)
    manifest = {
        "feature_dump": dump_path.name,
        "head": head_path.name,
        "backbone": job.backbone,
        "layer": adapter.layer,
        "dim": d,
        "resolution": resolution,
        "stride": resolution // fw,
        "count": len(records),
        "pretrained": job.pretrained,
        "reduction": adapter.reduction,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return dump_path, head_path, manifest_path
