"""Export voxel grids to mesh and image formats for inspection.

Occupied voxels become cubes (PLY or OBJ, colored by class); scalar grids
become slice montages (PNG) with a diverging colormap.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

from . import classes
from ._validation import ValidationError
from .grid import VoxelGrid
from .io import atomic_write_bytes

# One RGB color per class, chosen for contrast; empty space is never drawn.
CLASS_COLORS = np.array([
    [40, 40, 40],      # empty (unused)
    [178, 178, 102],   # ceiling
    [139, 105, 74],    # floor
    [200, 200, 200],   # wall
    [120, 180, 230],   # window
    [230, 130, 60],    # chair
    [170, 70, 160],    # bed
    [60, 160, 90],     # sofa
    [210, 180, 60],    # table
    [80, 80, 200],     # tvs
    [120, 90, 170],    # furniture
    [200, 70, 70],     # objects
], dtype=np.uint8)

_CUBE_CORNERS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
], dtype=np.float64)

_CUBE_QUADS = np.array([
    [0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4],
    [2, 3, 7, 6], [0, 4, 7, 3], [1, 2, 6, 5],
], dtype=np.int64)

# Each quad split along its first diagonal: 12 triangles per cube.
_CUBE_TRIS = np.concatenate([_CUBE_QUADS[:, [0, 1, 2]], _CUBE_QUADS[:, [0, 2, 3]]])


def _occupied_cubes(grid: VoxelGrid):
    if grid.data.dtype != np.uint8:
        raise ValidationError("mesh export needs a label grid (uint8)")
    idx = np.argwhere(grid.data != 0)
    labels = grid.data[grid.data != 0]
    spec = grid.spec
    corners = (np.asarray(spec.origin)
               + (idx[:, None, :] + _CUBE_CORNERS[None]) * spec.voxel_size)
    return corners, labels


def grid_to_ply(grid: VoxelGrid) -> bytes:
    """ASCII PLY of one cube per occupied voxel, vertex-colored by class.

    Cubes are triangulated: 8 vertices and 12 faces per voxel.
    """
    corners, labels = _occupied_cubes(grid)
    n = corners.shape[0]
    verts = corners.reshape(-1, 3)
    colors = np.repeat(CLASS_COLORS[labels], 8, axis=0)
    faces = (_CUBE_TRIS[None] + (np.arange(n) * 8)[:, None, None]).reshape(-1, 3)

    lines = [
        "ply", "format ascii 1.0",
        f"element vertex {len(verts)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, c in zip(verts, colors):
        lines.append(f"{v[0]:.6f} {v[1]:.6f} {v[2]:.6f} {c[0]} {c[1]} {c[2]}")
    for f in faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    return ("\n".join(lines) + "\n").encode("ascii")


def grid_to_obj(grid: VoxelGrid) -> bytes:
    """OBJ cubes grouped per class (no colors; groups carry class names)."""
    corners, labels = _occupied_cubes(grid)
    lines = []
    base = 1
    for cls in range(1, classes.NUM_CLASSES):
        sel = labels == cls
        if not sel.any():
            continue
        lines.append(f"g {classes.CLASS_NAMES[cls]}")
        for cube in corners[sel]:
            for v in cube:
                lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
            for q in _CUBE_QUADS:
                qq = q + base
                lines.append(f"f {qq[0]} {qq[1]} {qq[2]} {qq[3]}")
            base += 8
    return ("\n".join(lines) + "\n").encode("ascii")


def _colormap_scalar(data: np.ndarray, limit: float) -> np.ndarray:
    """Diverging blue-white-red map over [-limit, limit], (..., 3) uint8."""
    t = np.clip(data / limit, -1.0, 1.0)
    out = np.empty(t.shape + (3,), dtype=np.uint8)
    pos = np.clip(t, 0, 1)
    neg = np.clip(-t, 0, 1)
    out[..., 0] = np.rint(255 * (1 - neg)).astype(np.uint8)
    out[..., 1] = np.rint(255 * (1 - np.abs(t))).astype(np.uint8)
    out[..., 2] = np.rint(255 * (1 - pos)).astype(np.uint8)
    return out


def grid_to_slices(grid: VoxelGrid, limit: float | None = None,
                   columns: int = 8) -> Image.Image:
    """Montage of horizontal slices, bottom-up, laid out row-major.

    Label grids use the class palette; scalar grids use a diverging map
    scaled to ``limit`` (defaults to the largest magnitude present).
    """
    nx, ny, nz = grid.spec.dims
    if grid.data.dtype == np.uint8:
        rgb = CLASS_COLORS[np.minimum(grid.data, classes.NUM_CLASSES - 1)]
    else:
        if limit is None:
            limit = float(np.abs(grid.data).max()) or 1.0
        rgb = _colormap_scalar(grid.data.astype(np.float64), limit)

    columns = max(1, min(int(columns), ny))
    rows = (ny + columns - 1) // columns
    tile_w, tile_h = nx, nz
    canvas = np.zeros((rows * tile_h, columns * tile_w, 3), dtype=np.uint8)
    for j in range(ny):
        r, c = divmod(j, columns)
        # Slice j: x across, z down the tile.
        tile = rgb[:, j, :, :].transpose(1, 0, 2)
        canvas[r * tile_h:(r + 1) * tile_h, c * tile_w:(c + 1) * tile_w] = tile
    return Image.fromarray(canvas)


def write_export(path: str, grid: VoxelGrid, style: str,
                 limit: float | None = None) -> None:
    if style == "ply":
        atomic_write_bytes(path, grid_to_ply(grid))
    elif style == "obj":
        atomic_write_bytes(path, grid_to_obj(grid))
    elif style == "slices":
        img = grid_to_slices(grid, limit=limit)
        import io as _io

        buf = _io.BytesIO()
        img.save(buf, format="PNG")
        atomic_write_bytes(path, buf.getvalue())
    else:
        raise ValidationError(f"unknown export style {style!r}")
