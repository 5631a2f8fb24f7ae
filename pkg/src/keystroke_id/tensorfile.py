"""KDT1 binary tensor files and their JSON sidecar manifest.

Layout (little-endian): magic ``KDT1``, u32 sample count, u32 channels=5,
u32 rows=42, u32 cols=42; then per sample a u32 label followed by
5*42*42 float32 values in channel-major, row-major order. This is the
wire format consumed by the neural-baseline component, so it must stay
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimensionMismatch, ManifestMismatch, TruncatedFile
from .kdi import FLAT_LENGTH, KDI_SHAPE, NUM_CHANNELS
from .keys import VOCAB_SIZE

MAGIC = b"KDT1"
HEADER = struct.Struct("<4sIIII")
LABEL = struct.Struct("<I")
MAX_LABEL = 0xFFFF
_SAMPLE_BYTES = LABEL.size + FLAT_LENGTH * 4


def write_tensor_file(samples: list[tuple[int, np.ndarray]], path: Path) -> None:
    """Write (label, 5x42x42 tensor) samples; values are stored as float32."""
    for label, tensor in samples:
        if not 0 <= label <= MAX_LABEL:
            raise ValueError(f"label {label} outside [0, {MAX_LABEL}]")
        if tensor.shape != KDI_SHAPE:
            raise DimensionMismatch(f"expected {KDI_SHAPE}, got {tensor.shape}")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, len(samples), NUM_CHANNELS, VOCAB_SIZE, VOCAB_SIZE))
        for label, tensor in samples:
            fh.write(LABEL.pack(label))
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def read_tensor_file(path: Path) -> list[tuple[int, np.ndarray]]:
    """Exact inverse of write_tensor_file; tensors come back as float32."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        if data[:4] != MAGIC:
            raise BadMagic(f"{path}: not a KDT1 file")
        raise TruncatedFile(f"{path}: header cut short")
    magic, count, channels, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if (channels, rows, cols) != KDI_SHAPE:
        raise DimensionMismatch(
            f"{path}: dims {(channels, rows, cols)} != {KDI_SHAPE}"
        )
    expected = HEADER.size + count * _SAMPLE_BYTES
    if len(data) < expected:
        raise TruncatedFile(f"{path}: {len(data)} bytes, expected {expected}")

    samples: list[tuple[int, np.ndarray]] = []
    offset = HEADER.size
    for _ in range(count):
        (label,) = LABEL.unpack_from(data, offset)
        offset += LABEL.size
        values = np.frombuffer(data, dtype="<f4", count=FLAT_LENGTH, offset=offset)
        offset += FLAT_LENGTH * 4
        samples.append((label, values.reshape(KDI_SHAPE).copy()))
    return samples


def write_manifest(
    path: Path,
    labels: dict[str, int],
    split: dict[str, list[int]],
    window_length: int,
    standardized: bool,
) -> None:
    """Sidecar JSON: user→label map, split indices, provenance flags."""
    document = {
        "labels": labels,
        "split": {name: sorted(indices) for name, indices in split.items()},
        "window_length": window_length,
        "standardized": standardized,
    }
    path.write_text(json.dumps(document, sort_keys=True) + "\n")


def read_manifest(path: Path, sample_count: int, sample_labels: list[int]) -> dict:
    """Load and validate a manifest against its tensor file's contents.

    Raises ManifestMismatch when split indices fall outside the file, a
    split index repeats across partitions, or a sample label has no user
    in the label map.
    """
    document = json.loads(Path(path).read_text())
    for field in ("labels", "split", "window_length", "standardized"):
        if field not in document:
            raise ManifestMismatch(f"{path}: missing field {field!r}")
    known = set(document["labels"].values())
    missing = sorted(set(sample_labels) - known)
    if missing:
        raise ManifestMismatch(f"{path}: labels {missing} not in label map")
    seen: set[int] = set()
    for name, indices in document["split"].items():
        for index in indices:
            if not 0 <= index < sample_count:
                raise ManifestMismatch(f"{path}: split {name!r} index {index} out of range")
            if index in seen:
                raise ManifestMismatch(f"{path}: sample {index} in multiple splits")
            seen.add(index)
    return document
