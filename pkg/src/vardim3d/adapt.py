"""Task adapters on top of backbone features.

Contains the 3D classification head (global average pool + linear), the
group transform module (GTM) that fuses a depth-d 3D feature map into a 2D
one with a per-channel grouped 1x1 kernel, and the pyramid adapter that
applies one GTM per feature level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, ShapeError
from .vardim import Volume


class ClassificationHead(nn.Module):
    """Global average pooling over (D, H, W) followed by a linear classifier."""

    def __init__(self, in_channels: int, num_classes: int, dim: int = 3, seed: int = 0):
        super().__init__()
        if num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
        self.dim = dim
        self.fc = nn.Linear(in_channels, num_classes)
        g = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.fc.weight.normal_(0.0, 0.01, generator=g)
            self.fc.bias.zero_()

    def forward(self, x):
        # x: (N, C, D, H, W) for dim=3 or (N, C, H, W) for dim=2
        pooled = x.mean(dim=tuple(range(2, 2 + self.dim)))
        return self.fc(pooled)


def classify_head(feature: Volume, head: ClassificationHead) -> np.ndarray:
    """Run the classification head on a single (C, D, H, W) feature volume."""
    x = torch.from_numpy(np.ascontiguousarray(feature.data, dtype=np.float32))
    with torch.no_grad():
        logits = head(x.unsqueeze(0))
    return logits.squeeze(0).numpy()


class GroupTransformModule(nn.Module):
    """Grouped depth fusion: output channel c is a learned combination of the
    d depth slices of input channel c (1x1 spatial kernel), plus a bias.

    Initialized as a center-slice selector plus small noise, so a fresh
    module approximately extracts the middle slice.
    """

    def __init__(self, channels: int, depth: int, seed: int = 0, noise: float = 0.01):
        super().__init__()
        self.channels = channels
        self.depth = depth
        g = torch.Generator().manual_seed(seed)
        weight = torch.zeros(channels, depth)
        weight[:, (depth - 1) // 2] = 1.0
        if noise:
            weight += noise * torch.randn(channels, depth, generator=g)
        self.weight = nn.Parameter(weight)
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        # x: (N, C, D, H, W) -> (N, C, H, W)
        if x.shape[1] != self.channels or x.shape[2] != self.depth:
            raise ShapeError(
                f"GTM expects (N, {self.channels}, {self.depth}, H, W), got {tuple(x.shape)}"
            )
        fused = (x * self.weight[None, :, :, None, None]).sum(dim=2)
        return fused + self.bias[None, :, None, None]


def gtm_fuse(feature: Volume, gtm) -> np.ndarray:
    """Fuse a (C, D, H, W) feature volume into a (C, H, W) map.

    ``gtm`` is either a :class:`GroupTransformModule` or a (weight, bias)
    pair of arrays shaped (C, D) and (C,).
    """
    if not isinstance(gtm, GroupTransformModule):
        weight, bias = gtm
        weight = np.asarray(weight)
        c, d = weight.shape
        module = GroupTransformModule(c, d, noise=0.0)
        with torch.no_grad():
            module.weight.copy_(torch.as_tensor(weight, dtype=torch.float32))
            module.bias.copy_(torch.as_tensor(np.asarray(bias), dtype=torch.float32))
        gtm = module
    x = torch.from_numpy(np.ascontiguousarray(feature.data, dtype=np.float32))
    with torch.no_grad():
        out = gtm(x.unsqueeze(0))
    return out.squeeze(0).numpy()


@dataclass
class PyramidFeatures:
    """2D feature maps per level (fine to coarse) after GTM fusion."""

    levels: list
    per_level_depth: list


def build_gtm_bank(channel_counts, depths, seed: int = 0) -> list:
    """One GTM per pyramid level, matching each level's channels and depth."""
    return [
        GroupTransformModule(c, d, seed=seed + i)
        for i, (c, d) in enumerate(zip(channel_counts, depths))
    ]


def pyramid_adapt(stage_features: list, gtm_bank: list) -> PyramidFeatures:
    """Fuse each 3D feature level independently into a 2D map."""
    if len(stage_features) != len(gtm_bank):
        raise ConfigError(
            f"{len(stage_features)} feature levels but {len(gtm_bank)} GTMs"
        )
    levels = []
    depths = []
    for feat, gtm in zip(stage_features, gtm_bank):
        depths.append(feat.data.shape[1])
        levels.append(gtm_fuse(feat, gtm))
    return PyramidFeatures(levels=levels, per_level_depth=depths)


def gtm_bank_checkpoint_tensors(gtm_bank) -> dict:
    """Checkpoint naming for a pyramid GTM bank."""
    tensors = {}
    for i, gtm in enumerate(gtm_bank):
        tensors[f"adapt.gtm.level{i}.weight"] = gtm.weight.detach().numpy()
        tensors[f"adapt.gtm.level{i}.bias"] = gtm.bias.detach().numpy()
    return tensors
