import numpy as np
import pytest
from PIL import Image

from featexport.datasets import load_image_list


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Two deterministic 64x48 RGB images with labels and one box each."""
    root = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(7)
    entries = []
    for i, label in enumerate((3, 11)):
        arr = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        path = root / f"sample{i}.png"
        Image.fromarray(arr).save(path)
        entries.append((path, label, ((5.0, 5.0, 40.0, 30.0),)))
    return load_image_list(entries, num_classes=1000)
