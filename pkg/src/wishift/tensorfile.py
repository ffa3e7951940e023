"""Minimal tensor container used for spectrograms, sample sets, features
and checkpoint weights.

Layout, little-endian: magic ``"TNS1"`` | rank u8 | dims u64 x rank |
row-major float32 payload. A JSON sidecar next to the tensor carries
labels, domains and other metadata when needed.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import TensorFormatError

TENSOR_MAGIC = b"TNS1"


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim < 1 or a.ndim > 255:
        raise ValueError(f"rank {a.ndim} outside [1, 255]")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<B", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != TENSOR_MAGIC:
        raise TensorFormatError(f"expected magic {TENSOR_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 5:
        raise TensorFormatError("missing rank byte")
    rank = blob[4]
    head = 5 + 8 * rank
    if len(blob) < head:
        raise TensorFormatError("truncated dims")
    dims = struct.unpack_from(f"<{rank}Q", blob, 5)
    count = int(np.prod(dims)) if rank else 0
    payload = blob[head:]
    if len(payload) != count * 4:
        raise TensorFormatError(
            f"payload has {len(payload)} bytes, dims {dims} need {count * 4}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_sidecar(path: str | Path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
