"""Weight conversion and transplantation between 2D and 3D networks.

Four routes are provided:

* ``transplant_svd`` - copy conv/norm tensors verbatim from a (typically
  depth-preserving) pre-trained 3D backbone into a vanilla 3D backbone,
  ignoring stride/pooling configuration.
* ``inflate_i3d`` - repeat each 2D kernel k times along a new depth axis,
  scaled by 1/k so the 3D network reproduces the 2D one on depth-constant
  input (the unscaled variant is selectable).
* ``extend_zeropad`` - place the 2D kernel at the center depth slice with
  zeros elsewhere, so each output depth slice sees exactly one input slice.
* ``acs_split`` - partition output channels into three groups convolved
  with view-planar (1xkxk, kx1xk, kxkx1) reshapes of the 2D kernel.

Name mapping is manifest-driven: the 2D reference and 3D backbones share
identical parameter names, so matching is by name with strict shape checks,
never by substring heuristics.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.nn import functional as F

from .backbone.config import BackboneConfig
from .backbone.model import ResNet, state_tensors
from .checkpoint import Checkpoint
from .errors import IncompatibleArchitectureError, InvalidInputError, ShapeError
from .vardim import Volume

HEAD_PREFIX = "adapt."


@dataclass
class ConversionRule:
    kind: str                      # svd_transplant | i3d_inflate | zeropad_extend | acs_split
    options: dict = field(default_factory=dict)

    KINDS = ("svd_transplant", "i3d_inflate", "zeropad_extend", "acs_split")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInputError(f"unknown conversion kind {self.kind!r}")
        if self.kind in ("i3d_inflate", "zeropad_extend"):
            k = self.options.get("k")
            if k is None or k < 1 or k % 2 == 0:
                raise InvalidInputError(f"{self.kind} needs an odd k >= 1, got {k}")


@dataclass
class ConversionReport:
    """Partition of both parameter namespaces after a conversion."""

    matched: list = field(default_factory=list)
    transformed: list = field(default_factory=list)  # (name, src_shape, dst_shape)
    unmatched_source: list = field(default_factory=list)
    unmatched_target: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"matched\t{len(self.matched)}",
            f"transformed\t{len(self.transformed)}",
            f"unmatched_source\t{len(self.unmatched_source)}",
            f"unmatched_target\t{len(self.unmatched_target)}",
        ]
        for name in self.matched:
            lines.append(f"match\t{name}")
        for name, src, dst in self.transformed:
            lines.append(f"transform\t{name}\t{tuple(src)}->{tuple(dst)}")
        for name in self.unmatched_source:
            lines.append(f"source-only\t{name}")
        for name in self.unmatched_target:
            lines.append(f"target-only\t{name}")
        return "\n".join(lines)


def target_manifest(config: BackboneConfig) -> "OrderedDict[str, tuple]":
    """Name -> shape map of a 3D backbone built from ``config``."""
    net = ResNet(config, dim=3)
    return OrderedDict((n, tuple(a.shape)) for n, a in state_tensors(net).items())


def transplant_svd(source: Checkpoint, target_config: BackboneConfig):
    """Copy backbone conv/norm state verbatim into the target architecture.

    Stride and pooling configuration of the target is free to differ from
    the source; only names and tensor shapes must line up.  Task-head
    tensors (``adapt.*``) are never transplanted.
    """
    fp = source.fingerprint
    if fp.get("family") != target_config.family:
        raise IncompatibleArchitectureError(
            f"source family {fp.get('family')!r} != target family {target_config.family!r}"
        )
    if fp.get("stem") != target_config.stem:
        raise IncompatibleArchitectureError(
            f"source stem {fp.get('stem')!r} != target stem {target_config.stem!r}"
        )
    if fp.get("layout") != "CDHW":
        raise IncompatibleArchitectureError(
            f"source layout {fp.get('layout')!r} is not a 3D checkpoint"
        )

    manifest = target_manifest(target_config)
    report = ConversionReport()
    out = OrderedDict()
    mismatches = []
    for name, arr in source.tensors.items():
        if name.startswith(HEAD_PREFIX) or name not in manifest:
            report.unmatched_source.append(name)
            continue
        if tuple(arr.shape) != manifest[name]:
            mismatches.append((name, tuple(arr.shape), manifest[name]))
            continue
        out[name] = arr.copy()
        report.matched.append(name)
    if mismatches:
        diff = "; ".join(f"{n}: source {s} vs target {t}" for n, s, t in mismatches[:8])
        raise ShapeError(f"{len(mismatches)} tensor shape mismatches: {diff}")
    for name in manifest:
        if name not in out:
            report.unmatched_target.append(name)

    fingerprint = target_config.fingerprint()
    fingerprint["num_classes"] = None
    return Checkpoint(out, fingerprint), report


def _require_2d(source: Checkpoint, op: str):
    if source.fingerprint.get("layout") != "CHW":
        raise IncompatibleArchitectureError(
            f"{op} needs a 2D source checkpoint, got layout "
            f"{source.fingerprint.get('layout')!r}"
        )


def _converted_fingerprint(source: Checkpoint, **extra) -> dict:
    fp = dict(source.fingerprint)
    fp["layout"] = "CDHW"
    fp.update(extra)
    return fp


def inflate_i3d(source2d: Checkpoint, k: int, scale: str = "invk") -> Checkpoint:
    """Repeat each 2D conv kernel k times along a new depth axis.

    With ``scale="invk"`` every depth slice is the 2D kernel divided by k, so
    summing over depth recovers the 2D kernel exactly; run the result with
    ``z_pad_mode="replicate"`` to reproduce the 2D network on depth-constant
    input.  ``scale="none"`` keeps the raw repetition.
    """
    _require_2d(source2d, "i3d inflation")
    if k < 1 or k % 2 == 0:
        raise InvalidInputError(f"inflation factor k must be odd and >= 1, got {k}")
    if scale not in ("invk", "none"):
        raise InvalidInputError(f"scale must be 'invk' or 'none', got {scale!r}")
    out = OrderedDict()
    for name, arr in source2d.tensors.items():
        if arr.ndim == 4:  # conv kernel (out, in, kh, kw)
            w = np.repeat(arr[:, :, np.newaxis], k, axis=2)
            if scale == "invk":
                w = w / k
            out[name] = w
        else:
            out[name] = arr.copy()
    return Checkpoint(
        out,
        _converted_fingerprint(source2d, z_kernel=k, z_pad_mode="replicate",
                               converted_by="i3d_inflate", scale=scale),
    )


def extend_zeropad(source2d: Checkpoint, k: int) -> Checkpoint:
    """Place each 2D kernel at the center depth slice, zeros elsewhere."""
    _require_2d(source2d, "zero-pad extension")
    if k < 1 or k % 2 == 0:
        raise InvalidInputError(f"extension factor k must be odd and >= 1, got {k}")
    out = OrderedDict()
    for name, arr in source2d.tensors.items():
        if arr.ndim == 4:
            w = np.zeros((arr.shape[0], arr.shape[1], k, *arr.shape[2:]), dtype=np.float32)
            w[:, :, (k - 1) // 2] = arr
            out[name] = w
        else:
            out[name] = arr.copy()
    return Checkpoint(
        out,
        _converted_fingerprint(source2d, z_kernel=k, z_pad_mode="zeros",
                               converted_by="zeropad_extend"),
    )


def acs_partition(channels: int) -> tuple[int, int, int]:
    """Output-channel split into (axial, coronal, sagittal) group sizes."""
    if channels < 3:
        raise InvalidInputError(f"cannot split {channels} output channels into 3 view groups")
    c1 = -(-channels // 3)
    c2 = -(-(channels - c1) // 2)
    return c1, c2, channels - c1 - c2


@dataclass
class AcsConvParams:
    """View-planar kernels of one converted convolution."""

    axial: np.ndarray      # (c1, in, 1, k, k)
    coronal: np.ndarray    # (c2, in, k, 1, k)
    sagittal: np.ndarray   # (c3, in, k, k, 1)
    bias: np.ndarray | None = None

    @classmethod
    def from_2d(cls, weight: np.ndarray, bias=None) -> "AcsConvParams":
        weight = np.asarray(weight, dtype=np.float32)
        if weight.ndim != 4:
            raise ShapeError(f"expected (out, in, kh, kw) kernel, got shape {weight.shape}")
        c1, c2, c3 = acs_partition(weight.shape[0])
        return cls(
            axial=weight[:c1, :, np.newaxis, :, :],
            coronal=weight[c1:c1 + c2, :, :, np.newaxis, :],
            sagittal=weight[c1 + c2:, :, :, :, np.newaxis],
            bias=None if bias is None else np.asarray(bias, dtype=np.float32),
        )

    @property
    def group_sizes(self):
        return (self.axial.shape[0], self.coronal.shape[0], self.sagittal.shape[0])

    @property
    def in_channels(self):
        return self.axial.shape[1]


def acs_split(source2d: Checkpoint) -> Checkpoint:
    """Convert every conv kernel of a 2D checkpoint to its three ACS views.

    Kernel values are only rearranged, so the total conv parameter count is
    unchanged.  Norm and linear tensors are copied verbatim.
    """
    _require_2d(source2d, "ACS splitting")
    out = OrderedDict()
    for name, arr in source2d.tensors.items():
        if arr.ndim == 4:
            p = AcsConvParams.from_2d(arr)
            out[name + ".axial"] = p.axial
            out[name + ".coronal"] = p.coronal
            out[name + ".sagittal"] = p.sagittal
        else:
            out[name] = arr.copy()
    return Checkpoint(
        out, _converted_fingerprint(source2d, layout="ACS", converted_by="acs_split")
    )


def acs_conv_forward(x: Volume, params: AcsConvParams) -> Volume:
    """View-based 3D convolution: each output-channel group is convolved with
    its planar kernel, padded to preserve all spatial dims, and the three
    group outputs are concatenated along channels."""
    if x.data.shape[0] != params.in_channels:
        raise ShapeError(
            f"input has {x.data.shape[0]} channels, kernels expect {params.in_channels}"
        )
    t = torch.from_numpy(np.ascontiguousarray(x.data, dtype=np.float32)).unsqueeze(0)
    outs = []
    for w in (params.axial, params.coronal, params.sagittal):
        wt = torch.from_numpy(np.ascontiguousarray(w))
        pad = tuple((s - 1) // 2 for s in wt.shape[2:])
        outs.append(F.conv3d(t, wt, padding=pad))
    out = torch.cat(outs, dim=1).squeeze(0).numpy()
    if params.bias is not None:
        out = out + params.bias[:, np.newaxis, np.newaxis, np.newaxis]
    return Volume(out)


def diff_report(source: Checkpoint, result: Checkpoint) -> ConversionReport:
    """Generic namespace diff between a conversion's input and output."""
    report = ConversionReport()
    result_names = set(result.tensors)
    consumed = set()
    for name, arr in source.tensors.items():
        if name in result.tensors:
            dst = result.tensors[name]
            if tuple(dst.shape) == tuple(arr.shape):
                report.matched.append(name)
            else:
                report.transformed.append((name, tuple(arr.shape), tuple(dst.shape)))
            consumed.add(name)
        elif all(name + suf in result_names for suf in (".axial", ".coronal", ".sagittal")):
            report.transformed.append(
                (name, tuple(arr.shape), tuple(result.tensors[name + ".axial"].shape))
            )
            consumed.update(name + suf for suf in (".axial", ".coronal", ".sagittal"))
            consumed.add(name)
        else:
            report.unmatched_source.append(name)
    for name in result.tensors:
        if name not in consumed and name not in source.tensors:
            report.unmatched_target.append(name)
    return report


def apply_rule(rule: ConversionRule, source: Checkpoint, target_config=None):
    """Dispatch a conversion rule; returns (checkpoint, report)."""
    if rule.kind == "svd_transplant":
        if target_config is None:
            raise InvalidInputError("svd_transplant needs a target backbone config")
        return transplant_svd(source, target_config)
    if rule.kind == "i3d_inflate":
        ckpt = inflate_i3d(source, rule.options["k"], rule.options.get("scale", "invk"))
    elif rule.kind == "zeropad_extend":
        ckpt = extend_zeropad(source, rule.options["k"])
    else:
        ckpt = acs_split(source)
    return ckpt, diff_report(source, ckpt)
