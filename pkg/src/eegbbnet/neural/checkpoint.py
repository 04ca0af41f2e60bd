"""Versioned binary parameter checkpoints.

Layout: the magic string ``BBNET1`` followed by one record per tensor:

    uint16  name length (little-endian)
    bytes   name (utf-8)
    uint8   rank
    uint32  dims[rank] (little-endian)
    f32     values (little-endian, row-major)

Values are stored as 32-bit floats; tensors that are float32 in memory
round-trip bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"BBNET1"


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, array in tensors.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            arr = np.ascontiguousarray(array, dtype="<f4")
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:len(MAGIC)]!r}", offset=0)
    offset = len(MAGIC)
    tensors: dict[str, np.ndarray] = {}

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=offset)
        chunk = blob[offset : offset + n]
        offset += n
        return chunk

    while offset < len(blob):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(4 * count, f"data of {name!r}"), dtype="<f4")
        tensors[name] = data.reshape(dims).astype(np.float32)
    return tensors
