"""Backbone adapters: last-conv feature extractor + linear head weights.

resnet50 and inception_v3 end in global-average-pool -> fc, so their fc
weights ARE the per-channel head and exported logits reproduce the
model's own forward pass. vgg16's stock head is flatten -> MLP, which
has no equivalent per-channel weight vector; for it the adapter installs
a seeded GAP linear head (or caller-supplied weights) and the manifest
records that reduction.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


@dataclass
class Adapter:
    features: nn.Module  # image batch -> (n, d, h, w) last-conv features
    weights: np.ndarray  # (C, d) float32
    bias: np.ndarray | None
    layer: str
    dim: int
    default_resolution: int
    reduction: str  # "" when the head is the model's own fc


def _to_numpy(t):
    return t.detach().cpu().numpy().astype(np.float32)


def _resnet50(pretrained, head_override, seed):
    from torchvision.models import ResNet50_Weights, resnet50

    model = resnet50(weights=ResNet50_Weights.IMAGENET1K_V1 if pretrained else None)
    model.eval()
    features = nn.Sequential(
        model.conv1, model.bn1, model.relu, model.maxpool,
        model.layer1, model.layer2, model.layer3, model.layer4,
    )
    weights, bias = _head_arrays(model.fc, head_override)
    return Adapter(
        features=features, weights=weights, bias=bias,
        layer="layer4", dim=2048, default_resolution=224, reduction="",
    )


def _inception_v3(pretrained, head_override, seed):
    from torchvision.models import Inception_V3_Weights, inception_v3

    model = inception_v3(
        weights=Inception_V3_Weights.IMAGENET1K_V1 if pretrained else None,
        aux_logits=True if pretrained else False,
        init_weights=not pretrained,
    )
    model.eval()
    names = [
        "Conv2d_1a_3x3", "Conv2d_2a_3x3", "Conv2d_2b_3x3", "maxpool1",
        "Conv2d_3b_1x1", "Conv2d_4a_3x3", "maxpool2",
        "Mixed_5b", "Mixed_5c", "Mixed_5d", "Mixed_6a", "Mixed_6b",
        "Mixed_6c", "Mixed_6d", "Mixed_6e", "Mixed_7a", "Mixed_7b", "Mixed_7c",
    ]
    features = nn.Sequential(*[getattr(model, n) for n in names])
    weights, bias = _head_arrays(model.fc, head_override)
    return Adapter(
        features=features, weights=weights, bias=bias,
        layer="Mixed_7c", dim=2048, default_resolution=299, reduction="",
    )


def _vgg16(pretrained, head_override, seed):
    from torchvision.models import VGG16_Weights, vgg16

    model = vgg16(weights=VGG16_Weights.IMAGENET1K_V1 if pretrained else None)
    model.eval()
    if head_override is not None:
        weights, bias = _head_arrays(None, head_override)
        reduction = "gap-head-supplied"
    else:
        # the flatten+MLP classifier cannot be collapsed into per-channel
        # weights, so install a deterministic GAP linear head instead
        rng = np.random.default_rng(seed)
        weights = (rng.standard_normal((1000, 512)) / np.sqrt(512)).astype(np.float32)
        bias = np.zeros(1000, dtype=np.float32)
        reduction = f"gap-head-reinit(seed={seed})"
    return Adapter(
        features=model.features, weights=weights, bias=bias,
        layer="features", dim=512, default_resolution=224, reduction=reduction,
    )


def _head_arrays(fc, head_override):
    if head_override is not None:
        weights = np.asarray(head_override["weights"], dtype=np.float32)
        bias = head_override.get("bias")
        return weights, None if bias is None else np.asarray(bias, dtype=np.float32)
    return _to_numpy(fc.weight), _to_numpy(fc.bias)


_BUILDERS = {
    "resnet50": _resnet50,
    "inception_v3": _inception_v3,
    "vgg16": _vgg16,
}


def build_adapter(backbone, pretrained=False, head_override=None, seed=0):
    if backbone not in _BUILDERS:
        raise ValueError(f"unknown backbone {backbone!r}; choose from {sorted(_BUILDERS)}")
    # random-init weights must be reproducible for byte-identical re-export
    torch.manual_seed(seed)
    with torch.no_grad():
        adapter = _BUILDERS[backbone](pretrained, head_override, seed)
    for p in adapter.features.parameters():
        p.requires_grad_(False)
    if adapter.weights.shape[1] != adapter.dim:
        raise ValueError(
            f"head dim {adapter.weights.shape[1]} does not match declared d={adapter.dim}"
        )
    return adapter
