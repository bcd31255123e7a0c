"""Binary checkpoint format.

Layout: magic ``KIO1``, u32 version, u32 tensor count, then per tensor
u32 name length, UTF-8 name, u32 rank, u32 dims, float32 payload.  All
integers and floats are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .layers import Module

MAGIC = b"KIO1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(named_arrays) -> bytes:
    named_arrays = list(named_arrays)
    parts = [MAGIC, struct.pack("<II", VERSION, len(named_arrays))]
    for name, arr in named_arrays:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def decode(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {blob[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"truncated checkpoint at byte {pos}")
        out = blob[pos:pos + n]
        pos += n
        return out

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    tensors = {}
    for _ in range(count):
        (n,) = struct.unpack("<I", take(4))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        tensors[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape)
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last tensor")
    return tensors


def save_checkpoint(net: Module, path) -> None:
    Path(path).write_bytes(encode((n, p.data) for n, p in net.named_parameters()))


def load_checkpoint(net: Module, path) -> Module:
    """Fill ``net``'s parameters from ``path``; names and shapes must match."""
    tensors = decode(Path(path).read_bytes())
    params = dict(net.named_parameters())
    if set(tensors) != set(params):
        missing = sorted(set(params) ^ set(tensors))
        raise CheckpointError(f"checkpoint/network parameter mismatch: {missing[:5]}")
    for name, p in params.items():
        if tensors[name].shape != p.shape:
            raise CheckpointError(f"shape mismatch for {name}: {tensors[name].shape} vs {p.shape}")
        p.data = tensors[name].astype(np.float64)
    return net
