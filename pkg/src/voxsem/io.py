"""File formats: VOXB voxel volumes, 16-bit depth PNGs, atomic writes.

VOXB layout (little-endian):
    magic  'VOXB'
    u32    version (1 = base, 2 = adds TSDF encoding metadata)
    u32x3  dims (nx, ny, nz)
    f32    voxel_size
    f32x3  origin
    u8     payload tag: 0 = f32 scalar, 1 = u8 label, 2 = u8 state
    [v2]   u8 encoding mode, f32 truncation distance
    payload, x index fastest

Depth PNGs are single-channel 16-bit, millimeters, 0 = invalid pixel.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np
from PIL import Image

from ._validation import ValidationError
from .camera import DepthMap
from .grid import GridSpec, VoxelGrid

VOXB_MAGIC = b"VOXB"

PAYLOAD_SCALAR = 0
PAYLOAD_LABEL = 1
PAYLOAD_STATE = 2

_PAYLOAD_DTYPES = {
    PAYLOAD_SCALAR: np.dtype("<f4"),
    PAYLOAD_LABEL: np.dtype(np.uint8),
    PAYLOAD_STATE: np.dtype(np.uint8),
}

FORMAT_VERSION = 1  # format_version stamped into JSON documents


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, obj: dict) -> None:
    obj = dict(obj)
    obj.setdefault("format_version", FORMAT_VERSION)
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported format_version {version!r}")
    return obj


def voxb_bytes(grid: VoxelGrid, payload: int, mode: int | None = None,
               d_max: float | None = None) -> bytes:
    if payload not in _PAYLOAD_DTYPES:
        raise ValidationError(f"unknown payload tag {payload}")
    want = _PAYLOAD_DTYPES[payload]
    if grid.data.dtype != want:
        raise ValidationError(
            f"payload tag {payload} needs dtype {want}, grid has {grid.data.dtype}")
    version = 1 if mode is None else 2
    if version == 2 and d_max is None:
        raise ValidationError("TSDF volumes must record their truncation distance")
    spec = grid.spec
    head = [VOXB_MAGIC, struct.pack("<I", version),
            struct.pack("<III", *spec.dims),
            struct.pack("<f", spec.voxel_size),
            struct.pack("<fff", *spec.origin),
            struct.pack("<B", payload)]
    if version == 2:
        head.append(struct.pack("<Bf", int(mode), float(d_max)))
    # x fastest: Fortran ravel of the [ix, iy, iz] array.
    body = np.ascontiguousarray(grid.data.ravel(order="F")).astype(want, copy=False)
    return b"".join(head) + body.tobytes()


def write_voxb(path: str, grid: VoxelGrid, payload: int, mode: int | None = None,
               d_max: float | None = None) -> None:
    atomic_write_bytes(path, voxb_bytes(grid, payload, mode=mode, d_max=d_max))


def read_voxb(path: str):
    """Read a VOXB file.

    Returns (grid, payload_tag, meta) where meta is {} for version 1 and
    {"mode": int, "d_max": float} for version 2.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != VOXB_MAGIC:
        raise ValidationError(f"{path}: bad magic, not a VOXB file")
    off = 4

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ValidationError(f"{path}: truncated header")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (version,) = take("<I")
    if version not in (1, 2):
        raise ValidationError(f"{path}: unsupported VOXB version {version}")
    nx, ny, nz = take("<III")
    (voxel_size,) = take("<f")
    origin = take("<fff")
    (payload,) = take("<B")
    if payload not in _PAYLOAD_DTYPES:
        raise ValidationError(f"{path}: unknown payload tag {payload}")
    meta = {}
    if version == 2:
        mode, d_max = take("<Bf")
        meta = {"mode": int(mode), "d_max": float(d_max)}

    dtype = _PAYLOAD_DTYPES[payload]
    count = nx * ny * nz
    expected = count * dtype.itemsize
    body = blob[off:]
    if len(body) != expected:
        raise ValidationError(
            f"{path}: payload is {len(body)} bytes, expected {expected}")
    data = np.frombuffer(body, dtype=dtype).reshape((nx, ny, nz), order="F")
    if payload == PAYLOAD_SCALAR:
        data = np.ascontiguousarray(data, dtype=np.float32)
    else:
        data = np.ascontiguousarray(data)
    spec = GridSpec(origin, float(voxel_size), (int(nx), int(ny), int(nz)))
    return VoxelGrid(spec, data), payload, meta


def write_depth_png(path: str, depth: DepthMap) -> None:
    """Store metric depth as 16-bit millimeters; values over ~65 m clip."""
    mm = np.clip(np.rint(depth.values * 1000.0), 0, 65535).astype(np.uint16)
    img = Image.fromarray(mm)
    import io as _io

    buf = _io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_depth_png(path: str) -> DepthMap:
    try:
        img = Image.open(path)
        arr = np.asarray(img)
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ValidationError(f"{path}: cannot decode depth PNG ({exc})") from exc
    if arr.ndim != 2:
        raise ValidationError(f"{path}: depth PNG must be single channel")
    if arr.dtype not in (np.dtype(np.uint16), np.dtype(np.int32)):
        raise ValidationError(f"{path}: depth PNG must be 16-bit, got {arr.dtype}")
    return DepthMap(arr.astype(np.float64) / 1000.0)
