"""Binary checkpoint format for named parameter arrays.

Layout (little-endian):
    magic 'SSCW', u32 version, u32 entry_count, then per entry:
    u32 name_len, name (utf-8), u32 ndim, ndim x u32 shape, f32 data.

Entries are written in sorted name order so identical parameters always
produce identical bytes.
"""
from __future__ import annotations

import struct

import numpy as np

from .._validation import ValidationError
from ..io import atomic_write_bytes

SSCW_MAGIC = b"SSCW"
SSCW_VERSION = 1


def _flatten(params: dict) -> dict:
    flat = {}
    for layer, slot in params.items():
        for key, arr in slot.items():
            flat[f"{layer}.{key}"] = np.asarray(arr, dtype=np.float32)
    return flat


def _nest(flat: dict) -> dict:
    params = {}
    for name, arr in flat.items():
        layer, _, key = name.rpartition(".")
        if not layer:
            raise ValidationError(f"checkpoint entry {name!r} has no layer prefix")
        params.setdefault(layer, {})[key] = arr
    return params


def checkpoint_bytes(params: dict) -> bytes:
    flat = _flatten(params)
    chunks = [SSCW_MAGIC, struct.pack("<II", SSCW_VERSION, len(flat))]
    for name in sorted(flat):
        arr = flat[name]
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4").tobytes(order="C"))
    return b"".join(chunks)


def write_checkpoint(path: str, params: dict) -> None:
    atomic_write_bytes(path, checkpoint_bytes(params))


def read_checkpoint(path: str) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SSCW_MAGIC:
        raise ValidationError(f"{path}: bad magic, not a checkpoint")
    off = 4

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ValidationError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    version, count = take("<II")
    if version != SSCW_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    flat = {}
    for _ in range(count):
        (name_len,) = take("<I")
        if off + name_len > len(blob):
            raise ValidationError(f"{path}: truncated checkpoint")
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I") if ndim else ()
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        nbytes = n * 4
        if off + nbytes > len(blob):
            raise ValidationError(f"{path}: truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
        flat[name] = np.ascontiguousarray(arr, dtype=np.float32)
        off += nbytes
    if off != len(blob):
        raise ValidationError(f"{path}: {len(blob) - off} trailing bytes")
    return _nest(flat)
