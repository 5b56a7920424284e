"""Binary checkpoint format for named parameter tensors.

Layout (all integers uint32 little-endian)::

    magic  b"LRPCKPT\\0"
    version, entry count
    per entry: name length, UTF-8 name, rank, extents..., float64 LE data
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from lowres_pose.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"LRPCKPT\0"
FORMAT_VERSION = 1
MAX_RANK = 4

_U32 = struct.Struct("<I")


def encode_checkpoint(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named arrays; entries are written in sorted name order."""
    parts = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if arr.ndim > MAX_RANK:
            raise CheckpointError(f"Tensor '{name}' has rank {arr.ndim} > {MAX_RANK}")
        raw_name = name.encode("utf-8")
        parts.append(_U32.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(_U32.pack(arr.ndim))
        parts.extend(_U32.pack(d) for d in arr.shape)
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(f"Truncated checkpoint while reading {what}")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(blob: bytes) -> Dict[str, np.ndarray]:
    """Parse a checkpoint produced by :func:`encode_checkpoint`."""
    reader = _Reader(blob)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("Not a checkpoint file (bad magic)")
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    count = reader.u32("entry count")
    tensors: Dict[str, np.ndarray] = {}
    for i in range(count):
        name_len = reader.u32(f"entry {i} name length")
        try:
            name = reader.take(name_len, f"entry {i} name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Entry {i} name is not UTF-8") from e
        rank = reader.u32(f"'{name}' rank")
        if rank > MAX_RANK:
            raise CheckpointError(f"'{name}' has rank {rank} > {MAX_RANK}")
        shape = tuple(reader.u32(f"'{name}' extent") for _ in range(rank))
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = np.frombuffer(reader.take(8 * n, f"'{name}' data"), dtype="<f8")
        if name in tensors:
            raise CheckpointError(f"Duplicate entry '{name}'")
        tensors[name] = data.reshape(shape).astype(np.float64)
    if reader.pos != len(blob):
        raise CheckpointError(f"{len(blob) - reader.pos} trailing bytes after last entry")
    return tensors


def save_checkpoint(tensors: Mapping[str, np.ndarray], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors))
    logger.info("Wrote checkpoint with %d tensors to %s", len(tensors), path)
    return path


def load_checkpoint(path: str | Path) -> Dict[str, np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint '{path}': {e}") from e
    return decode_checkpoint(blob)
