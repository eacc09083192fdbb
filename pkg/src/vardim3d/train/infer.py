"""Sliding-window inference over volumes larger than the network's patch."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError, ShapeError
from ..vardim import Volume


def window_starts(extent: int, patch: int, stride: int) -> list[int]:
    """Start offsets covering [0, extent) with a final window flush to the end."""
    if stride <= 0:
        raise InvalidInputError(f"stride must be positive, got {stride}")
    if patch > extent:
        raise ShapeError(f"patch extent {patch} exceeds volume extent {extent}")
    starts = list(range(0, extent - patch + 1, stride))
    if starts[-1] != extent - patch:
        starts.append(extent - patch)
    return starts


def window_grid(volume_shape, patch_shape, stride3):
    """Per-axis window start lists for a (D, H, W) volume."""
    return tuple(
        window_starts(e, p, s) for e, p, s in zip(volume_shape, patch_shape, stride3)
    )


def sliding_window_infer(model, volume: Volume, patch_shape, stride3) -> Volume:
    """Average overlapping patch predictions into a full-volume probability map.

    ``model`` maps a (C, pd, ph, pw) array to per-voxel probabilities with the
    same spatial shape (channel dim optional); every voxel is covered by at
    least one window.
    """
    data = volume.data
    c, d, h, w = data.shape
    grid = window_grid((d, h, w), patch_shape, stride3)
    pd, ph, pw = patch_shape
    accum = None
    counts = np.zeros((d, h, w), dtype=np.float64)
    for zs in grid[0]:
        for ys in grid[1]:
            for xs in grid[2]:
                patch = data[:, zs:zs + pd, ys:ys + ph, xs:xs + pw]
                pred = model(patch)
                pred = pred.data if hasattr(pred, "data") else np.asarray(pred)
                pred = np.asarray(pred, dtype=np.float64)
                if pred.ndim == 3:
                    pred = pred[np.newaxis]
                if pred.shape[1:] != (pd, ph, pw):
                    raise ShapeError(
                        f"model returned spatial shape {pred.shape[1:]}, expected {(pd, ph, pw)}"
                    )
                if accum is None:
                    accum = np.zeros((pred.shape[0], d, h, w), dtype=np.float64)
                accum[:, zs:zs + pd, ys:ys + ph, xs:xs + pw] += pred
                counts[zs:zs + pd, ys:ys + ph, xs:xs + pw] += 1.0
    assert counts.min() >= 1.0
    return Volume(accum / counts[np.newaxis])
