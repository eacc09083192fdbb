"""Reformulation between 2D color images and pseudo-3D volumes.

A 3-channel image (3, H, W) and a single-channel depth-3 volume (1, 3, H, W)
hold the same numbers; the two views are exchanged by a fixed bijection where
channel c of the image becomes depth slice c of the volume.  Canonical array
layouts are channel-major: (C, H, W) for images and (C, D, H, W) for volumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass
class PlanarImage:
    """A 2D color image stored as (channels=3, height, width)."""

    data: np.ndarray
    value_range: tuple[float, float] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise InvalidInputError(
                f"image must be (channels, height, width), got {self.data.ndim} axes"
            )
        c, h, w = self.data.shape
        if c != 3:
            raise InvalidInputError(f"image must have 3 channels, got {c}")
        if h < 1 or w < 1:
            raise InvalidInputError(f"image spatial dims must be >= 1, got {(h, w)}")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class Volume:
    """A volumetric array stored as (channels, depth, height, width).

    ``spacing`` optionally carries per-axis physical spacing in mm as
    (depth, height, width).
    """

    data: np.ndarray
    spacing: tuple[float, float, float] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 4:
            raise InvalidInputError(
                f"volume must be (channels, depth, height, width), got {self.data.ndim} axes"
            )
        if any(s < 1 for s in self.data.shape):
            raise InvalidInputError(f"all volume dims must be >= 1, got {self.data.shape}")
        if self.spacing is not None and any(s <= 0 for s in self.spacing):
            raise InvalidInputError(f"spacing must be strictly positive, got {self.spacing}")

    @property
    def shape(self):
        return self.data.shape


def to_pseudo3d(image: PlanarImage) -> Volume:
    """Reinterpret a 3-channel image as a single-channel depth-3 volume.

    Color plane c of the input becomes depth slice c of the output, so the
    result has shape (1, 3, H, W) and holds exactly the input's values.
    """
    c = image.data.shape[0]
    if c != 3:
        raise InvalidInputError(f"pseudo-3D reformulation needs 3 channels, got {c}")
    return Volume(image.data[np.newaxis, :, :, :])


def from_pseudo3d(volume: Volume) -> PlanarImage:
    """Exact inverse of :func:`to_pseudo3d`: depth slice d becomes channel d."""
    c, d = volume.data.shape[:2]
    if c != 1 or d != 3:
        raise InvalidInputError(
            f"inverse reformulation needs a (1, 3, H, W) volume, got channels={c}, depth={d}"
        )
    return PlanarImage(volume.data[0])


def window_intensity(
    volume: Volume,
    lo: float,
    hi: float,
    out_lo: float = 0.0,
    out_hi: float = 255.0,
) -> Volume:
    """Clip values to [lo, hi] and map the window affinely onto [out_lo, out_hi].

    The default output range [0, 255] matches common CT preprocessing where a
    Hounsfield-unit window is normalized to 8-bit-like intensities.
    """
    if lo >= hi:
        raise InvalidInputError(f"window requires lo < hi, got [{lo}, {hi}]")
    if out_lo >= out_hi:
        raise InvalidInputError(f"output range requires out_lo < out_hi, got [{out_lo}, {out_hi}]")
    clipped = np.clip(volume.data.astype(np.float64), lo, hi)
    scaled = (clipped - lo) / (hi - lo) * (out_hi - out_lo) + out_lo
    return Volume(scaled, spacing=volume.spacing)
