"""Binary checkpoint format for named float64 tensors.

Layout (all integers little-endian):

    bytes 0..7   magic  b"IMDDAE\\x00\\x01"
    uint32       format version (currently 1)
    uint32       tensor count
    per tensor:
        uint32   name length in bytes
        bytes    name (utf-8)
        uint32   rank
        uint64[] dims
        f64[]    values, C order, little-endian

Round-tripping a file through load/save is byte-identical; tensor order is
preserved. Model metadata (seed, sizes, cell kind) travels as scalar
``meta.*`` entries so a checkpoint is self-describing.
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"IMDDAE\x00\x01"
VERSION = 1


def save(path: str, tensors: OrderedDict) -> None:
    """Write an ordered {name: array-like} mapping."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name, value in tensors.items():
            arr = np.ascontiguousarray(getattr(value, "values", value), dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load(path: str) -> OrderedDict:
    """Read a checkpoint back as an ordered {name: float64 ndarray} mapping."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", data, off)
    off += 8
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    tensors: OrderedDict = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}Q", data, off)
        off += 8 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        tensors[name] = arr.astype(np.float64).reshape(dims).copy()
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after last tensor record")
    return tensors
