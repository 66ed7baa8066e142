"""Dataset listings: a plain image list and the CUB-200-2011 layout.

A sample carries the original-resolution annotation; the export step
maps boxes through the resize/crop preprocessing.
"""

from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ImageSample:
    image_id: str
    path: Path
    label: int
    boxes: tuple = ()  # (x0, y0, x1, y1) in original image coordinates


@dataclass(frozen=True)
class Dataset:
    samples: tuple
    num_classes: int


def load_image_list(entries, num_classes):
    """entries: iterable of (path, label) or (path, label, boxes)."""
    samples = []
    for entry in entries:
        path, label = entry[0], int(entry[1])
        boxes = tuple(tuple(map(float, b)) for b in entry[2]) if len(entry) > 2 else ()
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"image {path} does not exist")
        if not 0 <= label < num_classes:
            raise ValueError(f"{path}: label {label} out of range [0, {num_classes})")
        samples.append(ImageSample(image_id=path.stem, path=path, label=label, boxes=boxes))
    return Dataset(samples=tuple(samples), num_classes=num_classes)


def _read_indexed(path, n_fields):
    out = {}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) < n_fields + 1:
            raise ValueError(f"{path}: malformed line {line!r}")
        out[int(parts[0])] = parts[1 : n_fields + 1]
    return out


def load_cub(root, split="test", limit=None):
    """CUB-200-2011 directory: images.txt, image_class_labels.txt,
    bounding_boxes.txt, train_test_split.txt, images/.

    Labels are converted to 0-based; boxes from (x, y, w, h) to
    half-open (x0, y0, x1, y1).
    """
    root = Path(root)
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    paths = _read_indexed(root / "images.txt", 1)
    labels = _read_indexed(root / "image_class_labels.txt", 1)
    bboxes = _read_indexed(root / "bounding_boxes.txt", 4)
    splits = _read_indexed(root / "train_test_split.txt", 1)
    want_train = split == "train"
    samples = []
    for idx in sorted(paths):
        if (splits[idx][0] == "1") != want_train:
            continue
        rel = paths[idx][0]
        x, y, w, h = (float(v) for v in bboxes[idx])
        samples.append(
            ImageSample(
                image_id=rel,
                path=root / "images" / rel,
                label=int(labels[idx][0]) - 1,
                boxes=((x, y, x + w, y + h),),
            )
        )
        if limit is not None and len(samples) >= limit:
            break
    if not samples:
        raise ValueError(f"no {split} images found under {root}")
    return Dataset(samples=tuple(samples), num_classes=200)
