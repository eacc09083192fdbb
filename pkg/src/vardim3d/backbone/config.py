"""Declarative description of the 3D ResNet variants built by this package."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from ..errors import ConfigError

FAMILIES = {
    # family -> (block kind, blocks per stage, channel expansion)
    "resnet18": ("basic", (2, 2, 2, 2), 1),
    "resnet34": ("basic", (3, 4, 6, 3), 1),
    "resnet50": ("bottleneck", (3, 4, 6, 3), 4),
}

STAGE_CHANNELS = (64, 128, 256, 512)

# stride slot order: stem conv, stem pool, stage2, stage3, stage4
N_STRIDE_SLOTS = 5


@dataclass(frozen=True)
class Stride3:
    """Per-axis downsampling factor (depth, height, width)."""

    d: int = 1
    h: int = 1
    w: int = 1

    def __post_init__(self):
        if min(self.d, self.h, self.w) < 1:
            raise ConfigError(f"strides must be >= 1, got {(self.d, self.h, self.w)}")


def _default_strides(depth_preserve: bool) -> tuple[Stride3, ...]:
    d = 1 if depth_preserve else 2
    return (
        Stride3(1, 2, 2),   # stem conv
        Stride3(d, 2, 2),   # stem pool
        Stride3(d, 2, 2),   # stage2
        Stride3(d, 2, 2),   # stage3
        Stride3(d, 2, 2),   # stage4
    )


@dataclass(frozen=True)
class BackboneConfig:
    """Everything needed to build (or reason about) a 3D residual backbone.

    ``stage_strides`` lists five per-axis strides: stem conv, stem pool and
    the entries of stages 2-4 (stage 1 never downsamples).  Depth reduction
    is implemented by center-aligned slice sampling, so a d-stride of 2 on a
    depth-9 input yields depth 5, then 3, then 1 (odd counts, center kept).

    ``z_kernel`` overrides the depth extent of every convolution kernel;
    ``None`` means cubic inflation (7^3 stem / 3^3 blocks / 1^3 projections).
    Converted-from-2D checkpoints (I3D / zero-pad) use ``z_kernel=k``.
    ``z_pad_mode`` selects the depth padding fill; "replicate" makes an
    inflated network exactly reproduce its 2D source on depth-constant input.
    """

    family: str = "resnet18"
    stem: str = "k7"                      # "k7" | "v1c"
    depth_preserve: bool = True
    stage_strides: tuple[Stride3, ...] | None = None
    norm: str = "batch"                   # "batch" | "group"
    group_norm_groups: int = 32
    in_channels: int = 1
    num_classes: int | None = None        # attach a classification head when set
    z_kernel: int | None = None
    z_pad_mode: str = "zeros"             # "zeros" | "replicate"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}, expected one of {sorted(FAMILIES)}")
        if self.stem not in ("k7", "v1c"):
            raise ConfigError(f"unknown stem {self.stem!r}")
        if self.norm not in ("batch", "group"):
            raise ConfigError(f"unknown norm {self.norm!r}")
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.num_classes is not None and self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.z_kernel is not None and (self.z_kernel < 1 or self.z_kernel % 2 == 0):
            raise ConfigError(f"z_kernel must be odd and >= 1, got {self.z_kernel}")
        if self.z_pad_mode not in ("zeros", "replicate"):
            raise ConfigError(f"unknown z_pad_mode {self.z_pad_mode!r}")
        if self.stage_strides is None:
            object.__setattr__(self, "stage_strides", _default_strides(self.depth_preserve))
        else:
            strides = tuple(
                s if isinstance(s, Stride3) else Stride3(*s) for s in self.stage_strides
            )
            object.__setattr__(self, "stage_strides", strides)
        if len(self.stage_strides) != N_STRIDE_SLOTS:
            raise ConfigError(
                f"stage_strides must have {N_STRIDE_SLOTS} entries "
                f"(stem conv, stem pool, stage2-4), got {len(self.stage_strides)}"
            )
        if self.depth_preserve and any(s.d != 1 for s in self.stage_strides):
            bad = [(i, s.d) for i, s in enumerate(self.stage_strides) if s.d != 1]
            raise ConfigError(
                f"depth_preserve requires every d-stride == 1, got d-strides {bad}"
            )

    @property
    def block(self) -> str:
        return FAMILIES[self.family][0]

    @property
    def blocks_per_stage(self) -> tuple[int, ...]:
        return FAMILIES[self.family][1]

    @property
    def expansion(self) -> int:
        return FAMILIES[self.family][2]

    @property
    def stage_out_channels(self) -> tuple[int, ...]:
        return tuple(c * self.expansion for c in STAGE_CHANNELS)

    def fingerprint(self) -> dict:
        return {
            "family": self.family,
            "stem": self.stem,
            "layout": "CDHW",
            "depth_preserve": self.depth_preserve,
            "in_channels": self.in_channels,
            "norm": self.norm,
            "z_kernel": self.z_kernel,
            "z_pad_mode": self.z_pad_mode,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_strides"] = [[s.d, s.h, s.w] for s in self.stage_strides]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        d = dict(d)
        if d.get("stage_strides") is not None:
            d["stage_strides"] = tuple(Stride3(*s) for s in d["stage_strides"])
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "BackboneConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def detection_config(family: str = "resnet18", **kw) -> BackboneConfig:
    """Vanilla variant with z-downsampling on pool and all res-stages.

    On a depth-9 input the five feature levels have depths (9, 5, 3, 1, 1).
    """
    return BackboneConfig(
        family=family,
        depth_preserve=False,
        stage_strides=(
            Stride3(1, 2, 2),
            Stride3(2, 2, 2),
            Stride3(2, 2, 2),
            Stride3(2, 2, 2),
            Stride3(2, 2, 2),
        ),
        **kw,
    )
