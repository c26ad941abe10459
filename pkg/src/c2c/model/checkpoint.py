"""Binary checkpoints: magic ``C2CM``, u32 version, then named float32 records.

Each record is: u32 name length, UTF-8 name, u32 rank, rank x u32 dims,
float32 little-endian payload.  Records run to the end of the file.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"C2CM"
VERSION = 1


def checkpoint_bytes(state: dict) -> bytes:
    out = [MAGIC, struct.pack("<I", VERSION)]
    for name, value in state.items():
        arr = np.asarray(value, dtype="<f4")
        encoded = name.encode("utf-8")
        out.append(struct.pack("<I", len(encoded)))
        out.append(encoded)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def parse_checkpoint(data: bytes) -> dict:
    if data[:4] != MAGIC:
        raise CheckpointError("not a C2CM checkpoint (bad magic)")
    if len(data) < 8:
        raise CheckpointError("truncated checkpoint header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    pos = 8
    state = {}
    try:
        while pos < len(data):
            (n,) = struct.unpack_from("<I", data, pos)
            name = data[pos + 4:pos + 4 + n].decode("utf-8")
            pos += 4 + n
            (rank,) = struct.unpack_from("<I", data, pos)
            dims = struct.unpack_from(f"<{rank}I", data, pos + 4)
            pos += 4 + 4 * rank
            count = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * count > len(data):
                raise CheckpointError(f"record {name!r} is truncated")
            state[name] = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims).astype(np.float32)
            pos += 4 * count
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint at byte {pos}: {exc}") from exc
    return state


def save_checkpoint(state: dict, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(state))


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
