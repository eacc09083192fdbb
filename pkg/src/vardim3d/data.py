"""Datasets: 2D image-folder ingestion, deterministic synthetic 3D benchmark
tasks, a matching synthetic 2D corpus for desk-scale pre-training, and
augmentation presets.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError, DataError
from .vardim import PlanarImage, Volume

log = logging.getLogger(__name__)


@dataclass
class LabeledSample:
    input: object               # PlanarImage or Volume
    label: object               # class index or mask Volume
    id: str = ""

    def __iter__(self):
        # allow "for x, y in dataset" over lists of samples
        return iter((self.input, self.label))


# ---------------------------------------------------------------------------
# image folders


def load_image_folder(path) -> list:
    """Directory-per-class image corpus with lexicographic label assignment.

    Grayscale files are replicated to 3 channels; empty class directories are
    excluded with a warning; undecodable files raise a DataError naming the
    file.
    """
    if not os.path.isdir(path):
        raise DataError(f"not a directory: {path}")
    class_names = sorted(
        d for d in os.listdir(path) if os.path.isdir(os.path.join(path, d))
    )
    kept = []
    for name in class_names:
        files = sorted(
            f for f in os.listdir(os.path.join(path, name))
            if not f.startswith(".")
        )
        if not files:
            log.warning("class directory %s is empty; excluding it", name)
            continue
        kept.append((name, files))
    samples = []
    for label, (name, files) in enumerate(kept):
        for fname in files:
            fpath = os.path.join(path, name, fname)
            try:
                with Image.open(fpath) as im:
                    arr = np.asarray(im.convert("RGB"), dtype=np.float32)
            except Exception as e:
                raise DataError(f"cannot decode image {fpath}: {e}") from e
            arr = np.transpose(arr, (2, 0, 1)) / 255.0
            samples.append(LabeledSample(PlanarImage(arr), label, id=f"{name}/{fname}"))
    return samples


def materialize_image_folder(samples, path, class_names=None) -> None:
    """Write (PlanarImage, label) samples as PNGs in directory-per-class layout."""
    for i, sample in enumerate(samples):
        image, label = sample if isinstance(sample, tuple) else (sample.input, sample.label)
        name = class_names[label] if class_names else f"class{label:03d}"
        cdir = os.path.join(path, name)
        os.makedirs(cdir, exist_ok=True)
        arr = np.clip(image.data, 0.0, 1.0)
        arr = (np.transpose(arr, (1, 2, 0)) * 255).round().astype(np.uint8)
        Image.fromarray(arr).save(os.path.join(cdir, f"sample{i:05d}.png"))


# ---------------------------------------------------------------------------
# synthetic benchmark tasks

GENERATOR_VERSION = 1


@dataclass(frozen=True)
class SynthTaskSpec:
    kind: str                       # "cls3d" | "seg3d"
    num_classes: int = 3
    volume_shape: tuple = (16, 32, 32)
    num_samples: int = 60
    noise_level: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cls3d", "seg3d"):
            raise ConfigError(f"unknown synthetic task kind {self.kind!r}")
        if not 2 <= self.num_classes <= 10:
            raise ConfigError(f"num_classes must be in [2, 10], got {self.num_classes}")
        if min(self.volume_shape) < 8:
            raise ConfigError(
                f"volume_shape {self.volume_shape} too small for embedded shapes (min extent 8)"
            )


def _shape_mask(kind_idx: int, shape, rng) -> np.ndarray:
    """Binary occupancy of one of ten parametric 3D shapes, jittered by rng."""
    d, h, w = shape
    zz, yy, xx = np.meshgrid(
        np.arange(d), np.arange(h), np.arange(w), indexing="ij"
    )
    cz = d / 2 + rng.uniform(-d / 8, d / 8)
    cy = h / 2 + rng.uniform(-h / 8, h / 8)
    cx = w / 2 + rng.uniform(-w / 8, w / 8)
    rz = d * rng.uniform(0.18, 0.3)
    ry = h * rng.uniform(0.18, 0.3)
    rx = w * rng.uniform(0.18, 0.3)
    nz, ny, nx = (zz - cz) / rz, (yy - cy) / ry, (xx - cx) / rx
    r2 = nz ** 2 + ny ** 2 + nx ** 2

    if kind_idx == 0:    # ellipsoid
        return r2 <= 1.0
    if kind_idx == 1:    # cuboid
        return (np.abs(nz) <= 1) & (np.abs(ny) <= 1) & (np.abs(nx) <= 1)
    if kind_idx == 2:    # tube along depth
        return ny ** 2 + nx ** 2 <= 0.6
    if kind_idx == 3:    # tube along width
        return nz ** 2 + ny ** 2 <= 0.6
    if kind_idx == 4:    # hollow shell
        return (r2 <= 1.0) & (r2 >= 0.4)
    if kind_idx == 5:    # three orthogonal slabs (cross)
        return (
            ((np.abs(nz) <= 0.35) & (np.abs(ny) <= 1) & (np.abs(nx) <= 1))
            | ((np.abs(ny) <= 0.35) & (np.abs(nz) <= 1) & (np.abs(nx) <= 1))
            | ((np.abs(nx) <= 0.35) & (np.abs(nz) <= 1) & (np.abs(ny) <= 1))
        )
    if kind_idx == 6:    # octahedron (L1 ball)
        return np.abs(nz) + np.abs(ny) + np.abs(nx) <= 1.2
    if kind_idx == 7:    # cone along depth
        frac = np.clip((nz + 1) / 2, 0.0, 1.0)
        return (ny ** 2 + nx ** 2 <= frac ** 2) & (np.abs(nz) <= 1)
    if kind_idx == 8:    # two parallel slabs
        return (np.abs(ny - 0.6) <= 0.25) | (np.abs(ny + 0.6) <= 0.25)
    # checkerboard of small cubes inside the bounding box
    inside = (np.abs(nz) <= 1) & (np.abs(ny) <= 1) & (np.abs(nx) <= 1)
    parity = ((zz // 3) + (yy // 3) + (xx // 3)) % 2 == 0
    return inside & parity


def _sample_rng(spec: SynthTaskSpec, idx: int):
    return np.random.default_rng(
        (spec.seed * 1_000_003 + idx * 7919 + GENERATOR_VERSION) % (2 ** 63)
    )


def synth3d_task(spec: SynthTaskSpec) -> list:
    """Deterministic synthetic 3D dataset with class-dependent embedded shapes.

    cls3d yields (Volume, class index); seg3d yields (Volume, mask Volume)
    where the mask marks shape voxels.  At noise_level 0 the classes are
    separable by construction.
    """
    samples = []
    for idx in range(spec.num_samples):
        rng = _sample_rng(spec, idx)
        label = idx % spec.num_classes
        mask = _shape_mask(label, spec.volume_shape, rng)
        data = np.zeros(spec.volume_shape, dtype=np.float32)
        data[mask] = 1.0
        if spec.noise_level > 0:
            data = data + spec.noise_level * rng.standard_normal(spec.volume_shape)
        vol = Volume(data[np.newaxis].astype(np.float32))
        if spec.kind == "cls3d":
            samples.append(LabeledSample(vol, label, id=f"cls3d/{idx:05d}"))
        else:
            samples.append(
                LabeledSample(
                    vol,
                    Volume(mask[np.newaxis].astype(np.float32)),
                    id=f"seg3d/{idx:05d}",
                )
            )
    return samples


def synth2d_corpus(num_classes: int = 10, num_samples: int = 200,
                   image_size: int = 32, noise_level: float = 0.1,
                   seed: int = 0) -> list:
    """Synthetic RGB corpus for desk-scale pre-training.

    Each image is three adjacent center slices of a synthetic 3D shape
    volume packed into the color channels, so the pseudo-3D reformulation
    recovers genuine 3D structure.
    """
    spec = SynthTaskSpec(
        kind="cls3d", num_classes=num_classes,
        volume_shape=(8, image_size, image_size),
        num_samples=num_samples, noise_level=noise_level, seed=seed,
    )
    out = []
    for sample in synth3d_task(spec):
        vol = sample.input.data[0]
        center = vol.shape[0] // 2
        channels = vol[center - 1:center + 2]
        out.append(LabeledSample(PlanarImage(channels.copy()), sample.label, id=sample.id))
    return out


# ---------------------------------------------------------------------------
# caching in the checkpoint tensor container


def dataset_to_checkpoint(samples, kind: str):
    """Materialize a synthetic dataset into the checkpoint tensor container."""
    from collections import OrderedDict

    from .checkpoint import Checkpoint

    tensors = OrderedDict()
    labels = []
    for i, sample in enumerate(samples):
        tensors[f"sample{i:05d}.input"] = np.asarray(sample.input.data, dtype=np.float32)
        if _is_mask_label(sample.label):
            tensors[f"sample{i:05d}.mask"] = np.asarray(sample.label.data, dtype=np.float32)
            labels.append(-1)
        else:
            labels.append(int(sample.label))
    tensors["labels"] = np.asarray(labels, dtype=np.float32)
    return Checkpoint(tensors, {"kind": kind, "layout": "dataset",
                                "num_samples": len(samples)})


def dataset_from_checkpoint(ckpt) -> list:
    """Inverse of :func:`dataset_to_checkpoint`."""
    labels = ckpt.tensors["labels"]
    samples = []
    for i in range(int(ckpt.fingerprint["num_samples"])):
        data = ckpt.tensors[f"sample{i:05d}.input"]
        vol = Volume(data) if data.ndim == 4 else PlanarImage(data)
        mask_name = f"sample{i:05d}.mask"
        if mask_name in ckpt.tensors:
            label = Volume(ckpt.tensors[mask_name])
        else:
            label = int(labels[i])
        samples.append(LabeledSample(vol, label, id=f"cache/{i:05d}"))
    return samples


# ---------------------------------------------------------------------------
# augmentation

PRESETS = ("lidc", "lits", "imagenet")


def _is_mask_label(label):
    return isinstance(label, Volume)


def _joint_crop(data, mask, out_shape, rng):
    spatial = data.shape[1:]
    if any(o > s for o, s in zip(out_shape, spatial)):
        raise DataError(f"crop {out_shape} larger than input {spatial}")
    starts = [
        rng.integers(0, s - o + 1) if s > o else 0
        for s, o in zip(spatial, out_shape)
    ]
    slices = tuple(slice(st, st + o) for st, o in zip(starts, out_shape))
    data = data[(slice(None),) + slices]
    if mask is not None:
        mask = mask[(slice(None),) + slices]
    return data, mask


def _joint_flip(data, mask, axis):
    data = np.flip(data, axis=axis)
    if mask is not None:
        mask = np.flip(mask, axis=axis)
    return data, mask


def augment(sample: LabeledSample, preset: str, rng) -> LabeledSample:
    """Apply one preset's randomized geometric pipeline to a sample.

    ``rng`` is a numpy Generator; the result is a pure function of
    (sample, preset, rng state).  Masks are transformed jointly with the
    input; axis rotations are 90-degree multiples, so no interpolation.
    """
    if preset not in PRESETS:
        raise DataError(f"unknown augmentation preset {preset!r}")
    data = np.array(sample.input.data)
    mask = np.array(sample.label.data) if _is_mask_label(sample.label) else None

    if preset == "imagenet":
        # resize shorter side to 1.15x crop, then random crop and h-flip
        c, h, w = data.shape
        crop = min(h, w)
        scale = 1.15
        new_hw = (max(crop, int(round(h * scale))), max(crop, int(round(w * scale))))
        data = np.stack([
            ndimage.zoom(ch, (new_hw[0] / h, new_hw[1] / w), order=1) for ch in data
        ])
        data, _ = _joint_crop(data, None, (crop, crop), rng)
        if rng.integers(0, 2):
            data, _ = _joint_flip(data, None, axis=2)
        out_input = PlanarImage(data.astype(np.float32))
        return LabeledSample(out_input, sample.label, id=sample.id)

    # volumetric presets
    d, h, w = data.shape[1:]
    if preset == "lidc":
        crop = tuple(min(48, s) for s in (d, h, w))
    else:  # lits
        crop = tuple(max(8, int(s * 0.85)) for s in (d, h, w))
    data, mask = _joint_crop(data, mask, crop, rng)
    for axis in (1, 2, 3):
        if rng.integers(0, 2):
            data, mask = _joint_flip(data, mask, axis)
    if preset == "lidc":
        k = int(rng.integers(0, 4))
        data = np.rot90(data, k, axes=(2, 3))
        if mask is not None:
            mask = np.rot90(mask, k, axes=(2, 3))
    else:  # lits: random in-plane re-scale
        factor = float(rng.uniform(0.9, 1.1))
        data = np.stack([
            ndimage.zoom(v, (1.0, factor, factor), order=1) for v in data
        ])
        if mask is not None:
            mask = np.stack([
                ndimage.zoom(v, (1.0, factor, factor), order=0) for v in mask
            ])
    out_input = Volume(np.ascontiguousarray(data, dtype=np.float32), spacing=sample.input.spacing)
    if mask is not None:
        out_label = Volume(np.ascontiguousarray(mask, dtype=np.float32))
    else:
        out_label = sample.label
    return LabeledSample(out_input, out_label, id=sample.id)
