"""Residual backbones with per-axis stride control, in 3D and 2D variants.

The 3D variant keeps every convolution depth-preserving (z-stride 1,
z-padding (k-1)/2); depth reduction is done by a center-aligned slice
sampler placed at the stem and stage entries, so the modified
(depth-preserving) and vanilla networks share identical weight manifests.
The 2D variant reuses the same topology and parameter names and serves as
the reference/source network for weight conversion and count cross-checks.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..adapt import ClassificationHead
from ..checkpoint import Checkpoint
from ..errors import ConfigError, ShapeError
from ..vardim import Volume
from .config import BackboneConfig, Stride3
from .shapes import depth_sample_indices, infer_shapes


class ZConv3d(nn.Conv3d):
    """3D conv with a fixed depth-preserving z-axis: z-stride 1 and z-padding
    (kz-1)/2, where kz defaults to the spatial kernel size (cubic inflation)
    and can be overridden by ``z_kernel``.

    ``z_pad_mode="replicate"`` pads depth with edge slices instead of zeros;
    an inflated-from-2D network then reproduces its source exactly on
    depth-constant input, which zero padding would break at the borders.
    """

    def __init__(self, in_c, out_c, kernel, stride_hw=(1, 1), z_kernel=None,
                 z_pad_mode="zeros"):
        kz = z_kernel if z_kernel is not None else kernel
        z_pad = (kz - 1) // 2
        self.replicate_z = z_pad_mode == "replicate" and z_pad > 0
        self.z_pad = z_pad
        super().__init__(
            in_c, out_c, (kz, kernel, kernel),
            stride=(1, *stride_hw),
            padding=(0 if self.replicate_z else z_pad,
                     (kernel - 1) // 2, (kernel - 1) // 2),
            bias=False,
        )

    def forward(self, x):
        if self.replicate_z:
            x = F.pad(x, (0, 0, 0, 0, self.z_pad, self.z_pad), mode="replicate")
        return super().forward(x)


class DepthSample(nn.Module):
    """Center-aligned depth subsampling: keeps the center slice and every
    ``stride``-th neighbor that fits, so the slice count stays odd and the
    center (key) slice stays aligned across levels."""

    def __init__(self, stride: int):
        super().__init__()
        self.stride = stride

    def forward(self, x):
        if self.stride == 1:
            return x
        idx = depth_sample_indices(x.shape[2], self.stride)
        return x.index_select(2, torch.as_tensor(idx, device=x.device))


def _conv_factory(dim, config: BackboneConfig):
    if dim == 3:
        def conv(in_c, out_c, kernel, stride_hw=(1, 1)):
            return ZConv3d(in_c, out_c, kernel, stride_hw,
                           z_kernel=config.z_kernel, z_pad_mode=config.z_pad_mode)
    else:
        def conv(in_c, out_c, kernel, stride_hw=(1, 1)):
            return nn.Conv2d(in_c, out_c, kernel, stride=stride_hw,
                             padding=(kernel - 1) // 2, bias=False)
    return conv


def _norm_factory(dim, config: BackboneConfig):
    if config.norm == "group":
        def norm(c):
            return nn.GroupNorm(min(config.group_norm_groups, c), c)
    elif dim == 3:
        norm = nn.BatchNorm3d
    else:
        norm = nn.BatchNorm2d
    return norm


class _Downsample(nn.Module):
    def __init__(self, conv, norm):
        super().__init__()
        self.conv = conv
        self.bn = norm

    def forward(self, x):
        return self.bn(self.conv(x))


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, in_c, c, stride_hw, conv, norm):
        super().__init__()
        self.conv1 = conv(in_c, c, 3, stride_hw)
        self.bn1 = norm(c)
        self.conv2 = conv(c, c, 3)
        self.bn2 = norm(c)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = None
        if stride_hw != (1, 1) or in_c != c:
            self.downsample = _Downsample(conv(in_c, c, 1, stride_hw), norm(c))

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, in_c, c, stride_hw, conv, norm):
        super().__init__()
        out_c = c * self.expansion
        self.conv1 = conv(in_c, c, 1)
        self.bn1 = norm(c)
        self.conv2 = conv(c, c, 3, stride_hw)
        self.bn2 = norm(c)
        self.conv3 = conv(c, out_c, 1)
        self.bn3 = norm(out_c)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = None
        if stride_hw != (1, 1) or in_c != out_c:
            self.downsample = _Downsample(conv(in_c, out_c, 1, stride_hw), norm(out_c))

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


class StemK7(nn.Module):
    def __init__(self, in_c, stride_hw, conv, norm):
        super().__init__()
        self.conv = conv(in_c, 64, 7, stride_hw)
        self.bn = norm(64)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.relu(self.bn(self.conv(x)))


class StemV1c(nn.Module):
    """Three 3x3(x3) convolutions replacing the single large stem kernel."""

    def __init__(self, in_c, stride_hw, conv, norm):
        super().__init__()
        self.conv1 = conv(in_c, 32, 3, stride_hw)
        self.bn1 = norm(32)
        self.conv2 = conv(32, 32, 3)
        self.bn2 = norm(32)
        self.conv3 = conv(32, 64, 3)
        self.bn3 = norm(64)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        x = self.relu(self.bn1(self.conv1(x)))
        x = self.relu(self.bn2(self.conv2(x)))
        return self.relu(self.bn3(self.conv3(x)))


class ResNet(nn.Module):
    """Topology shared by the 3D backbone and its 2D reference (``dim=2``)."""

    def __init__(self, config: BackboneConfig, dim: int = 3):
        super().__init__()
        self.dim = dim
        conv = _conv_factory(dim, config)
        norm = _norm_factory(dim, config)
        strides = config.stage_strides
        block_cls = BasicBlock if config.block == "basic" else Bottleneck

        stem_cls = StemK7 if config.stem == "k7" else StemV1c
        self.stem = stem_cls(config.in_channels, (strides[0].h, strides[0].w), conv, norm)
        if dim == 3:
            self.stem_dsample = DepthSample(strides[0].d)
            self.pool = nn.MaxPool3d((1, 3, 3), stride=(1, strides[1].h, strides[1].w),
                                     padding=(0, 1, 1))
            self.pool_dsample = DepthSample(strides[1].d)
        else:
            self.pool = nn.MaxPool2d(3, stride=(strides[1].h, strides[1].w), padding=1)

        in_c = 64
        for stage_idx, c in enumerate((64, 128, 256, 512)):
            n_blocks = config.blocks_per_stage[stage_idx]
            if stage_idx == 0:
                stride_hw, stride_d = (1, 1), 1
            else:
                s = strides[stage_idx + 1]
                stride_hw, stride_d = (s.h, s.w), s.d
            blocks = []
            for b in range(n_blocks):
                blocks.append(block_cls(in_c, c, stride_hw if b == 0 else (1, 1), conv, norm))
                in_c = c * block_cls.expansion
            setattr(self, f"layer{stage_idx + 1}", nn.Sequential(*blocks))
            if dim == 3:
                setattr(self, f"dsample{stage_idx + 1}", DepthSample(stride_d))

        self.adapt = None
        if config.num_classes is not None:
            self.adapt = ClassificationHead(in_c, config.num_classes, dim=dim)

    def features(self, x):
        """Per-level feature maps: stem output followed by stages 1-4."""
        x = self.stem(x)
        if self.dim == 3:
            x = self.stem_dsample(x)
        feats = [x]
        x = self.pool(x)
        if self.dim == 3:
            x = self.pool_dsample(x)
        for i in range(1, 5):
            if self.dim == 3:
                x = getattr(self, f"dsample{i}")(x)
            x = getattr(self, f"layer{i}")(x)
            feats.append(x)
        return feats

    def forward(self, x):
        out = self.features(x)[-1]
        if self.adapt is not None:
            out = self.adapt(out)
        return out


def init_parameters(net: nn.Module, seed: int) -> None:
    """Deterministic parameter initialization driven by one integer seed."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in net.named_parameters():
            if p.ndim >= 3:  # conv kernels
                fan_out = p.shape[0] * int(np.prod(p.shape[2:]))
                p.normal_(0.0, (2.0 / fan_out) ** 0.5, generator=g)
            elif p.ndim == 2:  # linear / fusion weights
                p.normal_(0.0, 0.01, generator=g)
            elif name.endswith(".bias"):
                p.zero_()
            else:  # norm scales
                p.fill_(1.0)


_EXCLUDED_STATE = ("num_batches_tracked",)


def state_tensors(net: nn.Module) -> "OrderedDict[str, np.ndarray]":
    """All persistent state (parameters and norm running statistics)."""
    out = OrderedDict()
    for name, t in net.state_dict().items():
        if any(name.endswith(s) for s in _EXCLUDED_STATE):
            continue
        out[name] = t.detach().cpu().numpy().astype(np.float32)
    return out


def load_state_tensors(net: nn.Module, tensors, strict: bool = True) -> list:
    """Copy named tensors into the module; returns names that were loaded.

    With ``strict`` every non-excluded model tensor must be provided.  Shape
    mismatches always raise.
    """
    state = net.state_dict()
    loaded = []
    missing = []
    for name, t in state.items():
        if any(name.endswith(s) for s in _EXCLUDED_STATE):
            continue
        if name not in tensors:
            missing.append(name)
            continue
        src = np.asarray(tensors[name])
        if tuple(src.shape) != tuple(t.shape):
            raise ShapeError(
                f"tensor {name!r}: checkpoint shape {tuple(src.shape)} vs "
                f"model shape {tuple(t.shape)}"
            )
        t.copy_(torch.from_numpy(np.ascontiguousarray(src, dtype=np.float32)))
        loaded.append(name)
    if strict and missing:
        raise ShapeError(f"checkpoint is missing tensors: {missing[:8]}{'...' if len(missing) > 8 else ''}")
    return loaded


@dataclass
class BackboneModel:
    """A built backbone: config plus the underlying network module."""

    config: BackboneConfig
    net: ResNet

    @property
    def stage_outputs(self):
        return (64,) + self.config.stage_out_channels

    def to_checkpoint(self) -> Checkpoint:
        fp = self.config.fingerprint()
        if self.net.dim == 2:
            fp["layout"] = "CHW"
        fp["num_classes"] = self.config.num_classes
        return Checkpoint(state_tensors(self.net), fp)

    def load_checkpoint(self, ckpt: Checkpoint, strict: bool = True) -> list:
        return load_state_tensors(self.net, ckpt.tensors, strict=strict)


def build_backbone(config: BackboneConfig, seed: int = 0) -> BackboneModel:
    """Construct a 3D backbone with deterministic initialization."""
    net = ResNet(config, dim=3)
    init_parameters(net, seed)
    net.eval()
    return BackboneModel(config=config, net=net)


def build_reference_2d(family: str = "resnet18", num_classes: int | None = 1000,
                       in_channels: int = 3, seed: int = 0) -> BackboneModel:
    """2D counterpart with identical topology and parameter names; used as a
    conversion source and for parameter/FLOP cross-checks."""
    config = BackboneConfig(family=family, in_channels=in_channels,
                            num_classes=num_classes)
    net = ResNet(config, dim=2)
    init_parameters(net, seed)
    net.eval()
    return BackboneModel(config=config, net=net)


def forward_features(model: BackboneModel, x: Volume) -> list:
    """Per-stage feature volumes for one input; shapes match infer_shapes."""
    expected = infer_shapes(model.config, x.shape)
    t = torch.from_numpy(np.ascontiguousarray(x.data, dtype=np.float32)).unsqueeze(0)
    model.net.eval()
    with torch.no_grad():
        feats = model.net.features(t)
    out = []
    for exp, f in zip(expected, feats):
        arr = f.squeeze(0).numpy()
        if tuple(arr.shape) != tuple(exp):
            raise ShapeError(f"feature shape {arr.shape} does not match inferred {exp}")
        out.append(Volume(arr))
    return out
