"""numpy access to lemwave datasets and prediction grids.

Reads the JSON manifest and the tensors and labels of each sample file in
place through the byte offsets the manifest records, and writes the "WPRD"
prediction files that `sim_cli eval` scores.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


@dataclass
class Sample:
    id: str
    split: str
    type: str
    crack_size: float
    tensor: np.ndarray  # (receivers, steps, 2) float32
    label100: np.ndarray  # (100, 100) uint8
    label16: np.ndarray  # (16, 16) uint8


class Dataset:
    def __init__(self, manifest_path: str | Path):
        self.path = Path(manifest_path)
        self.root = self.path.parent
        self.manifest = json.loads(self.path.read_text())
        if self.manifest.get("format") != "lemwave-dataset":
            raise ValueError(f"{self.path}: not a lemwave dataset manifest")
        self.entries = self.manifest["samples"]

    def __len__(self) -> int:
        return len(self.entries)

    def dataset_checksum(self) -> int:
        packed = b"".join(struct.pack("<Q", int(e["checksum"], 16)) for e in self.entries)
        return fnv1a64(packed)

    def ids(self, split: str | None = None) -> list[str]:
        return [e["id"] for e in self.entries if split is None or e["split"] == split]

    def load(self, i: int, verify: bool = True) -> Sample:
        e = self.entries[i]
        raw = (self.root / e["file"]).read_bytes()
        if len(raw) != e["bytes"]:
            raise ValueError(f"{e['id']}: {len(raw)} bytes on disk, manifest says {e['bytes']}")
        if verify and fnv1a64(raw) != int(e["checksum"], 16):
            raise ValueError(f"{e['id']}: checksum mismatch")

        def view(block, dtype):
            shape = tuple(block["shape"])
            count = int(np.prod(shape))
            return np.frombuffer(raw, dtype=dtype, count=count, offset=block["offset"]).reshape(shape)

        return Sample(
            id=e["id"],
            split=e["split"],
            type=e["type"],
            crack_size=e["crack_size"],
            tensor=view(e["tensor"], "<f4"),
            label100=view(e["label100"], np.uint8),
            label16=view(e["label16"], np.uint8),
        )


PREDICTION_MAGIC = b"WPRD"


def write_prediction(path: str | Path, sample_id: str, probs: np.ndarray) -> None:
    probs = np.asarray(probs, dtype="<f4")
    if probs.ndim != 2 or not np.all((probs >= 0) & (probs <= 1)):
        raise ValueError("probabilities must be a 2-D grid in [0, 1]")
    ident = sample_id.encode()
    rows, cols = probs.shape
    header = PREDICTION_MAGIC + struct.pack("<II", 1, len(ident)) + ident + struct.pack("<II", rows, cols)
    Path(path).write_bytes(header + probs.tobytes())


def read_prediction(path: str | Path) -> tuple[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != PREDICTION_MAGIC:
        raise ValueError(f"{path}: bad magic")
    version, n = struct.unpack_from("<II", raw, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    ident = raw[12 : 12 + n].decode()
    rows, cols = struct.unpack_from("<II", raw, 12 + n)
    probs = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=20 + n).reshape(rows, cols)
    return ident, probs
