"""Pure shape arithmetic for backbone feature maps.

Mirrors the real forward pass so shape claims can be checked without
building weights.  All convolutions keep depth (z-stride 1, z-padding
(k-1)/2); depth reduction happens only in the center-aligned slice sampler.
"""

from __future__ import annotations

from ..errors import ConfigError, ShapeError
from .config import BackboneConfig


def conv_out(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def depth_sample_out(depth: int, stride: int) -> int:
    """Output depth of center-aligned slice sampling.

    Keeps the center slice and every ``stride``-th neighbor that fits, so the
    result is always odd: 9 -> 5 -> 3 -> 1 under stride 2.  Stride 1 is the
    identity.
    """
    if stride == 1:
        return depth
    half = (depth - 1) // (2 * stride)
    return 2 * half + 1


def depth_sample_indices(depth: int, stride: int) -> list[int]:
    if stride == 1:
        return list(range(depth))
    center = (depth - 1) // 2
    half = (depth - 1) // (2 * stride)
    return [center + stride * j for j in range(-half, half + 1)]


def _check_positive(shape, where):
    if any(s < 1 for s in shape):
        raise ShapeError(f"shape underflow at {where}: got {tuple(shape)}")


def infer_shapes(config: BackboneConfig, input_shape) -> list[tuple[int, int, int, int]]:
    """Per-level output shapes (stem, stage1..stage4) for a (C, D, H, W) input."""
    if len(input_shape) != 4:
        raise ShapeError(f"input shape must be (C, D, H, W), got {tuple(input_shape)}")
    c, d, h, w = input_shape
    if c != config.in_channels:
        raise ShapeError(
            f"input has {c} channels but config expects {config.in_channels}"
        )
    _check_positive(input_shape, "input")
    strides = config.stage_strides
    shapes = []

    # stem conv(s)
    if config.stem == "k7":
        h = conv_out(h, 7, strides[0].h, 3)
        w = conv_out(w, 7, strides[0].w, 3)
    else:  # v1c: three 3x3x3 convs, first one strided
        h = conv_out(h, 3, strides[0].h, 1)
        w = conv_out(w, 3, strides[0].w, 1)
    d = depth_sample_out(d, strides[0].d)
    _check_positive((64, d, h, w), "stem")
    shapes.append((64, d, h, w))

    # stem pool
    h = conv_out(h, 3, strides[1].h, 1)
    w = conv_out(w, 3, strides[1].w, 1)
    d = depth_sample_out(d, strides[1].d)
    _check_positive((64, d, h, w), "stem pool")

    for stage_idx, out_c in enumerate(config.stage_out_channels):
        if stage_idx > 0:
            s = strides[stage_idx + 1]
            h = conv_out(h, 3, s.h, 1)
            w = conv_out(w, 3, s.w, 1)
            d = depth_sample_out(d, s.d)
        _check_positive((out_c, d, h, w), f"stage{stage_idx + 1}")
        shapes.append((out_c, d, h, w))
    return shapes
