"""Single-file checkpoint container used by every module.

A checkpoint is an ordered name -> tensor map plus a fingerprint describing
the architecture it belongs to.  On disk it is one archive: a magic line, a
JSON header (fingerprint + manifest with byte offsets), then a raw binary
blob of little-endian float32 tensors in row-major order.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError

MAGIC = b"VARDIM3D-CKPT v1\n"

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """Ordered named-tensor store with an architecture fingerprint.

    Fingerprint keys in use: ``family``, ``stem``, ``layout`` ("CHW" for 2D
    models, "CDHW" for 3D), ``depth_preserve``, ``version`` plus free-form
    extras (``in_channels``, ``norm``, ``z_kernel``, ...).
    """

    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    fingerprint: dict = field(default_factory=dict)

    def __post_init__(self):
        converted = OrderedDict()
        for name, arr in self.tensors.items():
            converted[name] = np.ascontiguousarray(arr, dtype=np.float32)
        self.tensors = converted
        self.fingerprint = dict(self.fingerprint)
        self.fingerprint.setdefault("version", FORMAT_VERSION)

    def __contains__(self, name):
        return name in self.tensors

    def __getitem__(self, name):
        return self.tensors[name]

    def names(self):
        return list(self.tensors.keys())

    def manifest(self):
        """(name, shape, dtype, byte_offset) rows in storage order."""
        rows = []
        offset = 0
        for name, arr in self.tensors.items():
            rows.append((name, tuple(arr.shape), "float32", offset))
            offset += arr.nbytes
        return rows

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            OrderedDict((k, v.copy()) for k, v in self.tensors.items()),
            dict(self.fingerprint),
        )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write a checkpoint as a single archive file."""
    header = {
        "fingerprint": ckpt.fingerprint,
        "manifest": [
            {"name": n, "shape": list(s), "dtype": d, "offset": o}
            for n, s, d, o in ckpt.manifest()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(f"{len(header_bytes)}\n".encode("ascii"))
            f.write(header_bytes)
            for arr in ckpt.tensors.values():
                f.write(arr.astype("<f4", copy=False).tobytes())
    except OSError as e:
        raise IOError(f"failed to write checkpoint to {path}: {e}") from e


def load_checkpoint(path) -> Checkpoint:
    """Read an archive written by :func:`save_checkpoint`, verifying integrity."""
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(MAGIC):
        raise IntegrityError(f"{path}: not a checkpoint archive (bad magic)")
    rest = raw[len(MAGIC):]
    newline = rest.index(b"\n")
    header_len = int(rest[:newline])
    header_start = newline + 1
    header = json.loads(rest[header_start:header_start + header_len])
    blob = rest[header_start + header_len:]

    expected = 0
    for row in header["manifest"]:
        if row["offset"] != expected:
            raise IntegrityError(
                f"{path}: manifest offsets not contiguous at tensor {row['name']!r}"
            )
        expected += int(np.prod(row["shape"], dtype=np.int64)) * 4 if row["shape"] else 4
    if len(blob) != expected:
        raise IntegrityError(
            f"{path}: blob length {len(blob)} does not match manifest total {expected}"
        )

    tensors = OrderedDict()
    for row in header["manifest"]:
        shape = tuple(row["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(
            blob, dtype="<f4", count=count, offset=row["offset"]
        ).reshape(shape).copy()
        tensors[row["name"]] = arr
    return Checkpoint(tensors, header["fingerprint"])
