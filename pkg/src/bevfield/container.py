"""Binary container format shared by all on-disk artifacts.

Layout: 8-byte ASCII magic, u32 little-endian header length, UTF-8 JSON
header, then a raw little-endian f32 payload. The JSON header carries all
shape/metadata needed to reinterpret the payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

BEV_MAGIC = b"BEVMAP01"
GRID_MAGIC = b"FGRID001"
IMAGE_MAGIC = b"IMGF0001"
WEIGHTS_MAGIC = b"BERFW001"


class ContainerError(ValueError):
    pass


def write_container(path: str | Path, magic: bytes, header: dict, payload: np.ndarray) -> None:
    if len(magic) != 8:
        raise ContainerError(f"magic must be 8 bytes, got {len(magic)}")
    raw = np.ascontiguousarray(payload, dtype="<f4").tobytes()
    hdr = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(raw)


def read_container(path: str | Path, magic: bytes) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as f:
        got = f.read(8)
        if got != magic:
            raise ContainerError(f"bad magic in {path}: expected {magic!r}, got {got!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = np.frombuffer(f.read(), dtype="<f4")
    return header, payload
