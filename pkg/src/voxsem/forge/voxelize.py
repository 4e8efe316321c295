"""Solid voxelization of object meshes on a fixed-resolution cube.

Surface voxels come from exact triangle-box overlap tests; the interior is
whatever empty space cannot reach the grid boundary (6-connected flood).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .._validation import ValidationError
from .mesh import TriMesh

DEFAULT_RESOLUTION = 128

_FACE_STRUCTURE = ndimage.generate_binary_structure(3, 1)  # 6-connectivity


@dataclass
class ObjectVoxelization:
    """Occupancy of one mesh on a cube grid anchored at the mesh AABB min.

    ``voxel_size`` is chosen so the largest mesh dimension spans exactly
    ``resolution`` voxels; shorter axes leave trailing empty space.
    """

    occupied: np.ndarray = field(repr=False)
    origin: np.ndarray
    voxel_size: float
    resolution: int

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool)
        r = int(self.resolution)
        if self.occupied.shape != (r, r, r):
            raise ValidationError(
                f"occupancy shape {self.occupied.shape} does not match resolution {r}")
        self.origin = np.asarray(self.origin, dtype=np.float64)

    def shell(self) -> np.ndarray:
        """Occupied voxels with fewer than six occupied face neighbors."""
        core = ndimage.binary_erosion(self.occupied, structure=_FACE_STRUCTURE,
                                      border_value=0)
        return self.occupied & ~core

    def centers(self, mask: np.ndarray) -> np.ndarray:
        """Mesh-frame centers of the voxels selected by ``mask``, (n, 3)."""
        idx = np.argwhere(mask)
        return self.origin + (idx + 0.5) * self.voxel_size


_SLACK = 1e-9  # meters; counts exact face-on-cell-boundary tangency as overlap


def _triangle_box_overlap(corners: np.ndarray, centers: np.ndarray,
                          half: float) -> np.ndarray:
    """Separating-axis test of one triangle against many cubes.

    corners: (3, 3) triangle vertices. centers: (m, 3) cube centers, all
    cubes sharing half-extent ``half``. Returns a boolean overlap mask.
    A touching contact must be kept, but computing the projections as
    written cancels catastrophically there, so every axis gets a hair of
    slack rather than an exact comparison.
    """
    v0, v1, v2 = corners
    edges = (v1 - v0, v2 - v1, v0 - v2)
    sep = np.zeros(centers.shape[0], dtype=bool)
    reach = half + _SLACK

    # Box axes: compare triangle extent per axis against the slab.
    tri_min = corners.min(axis=0)
    tri_max = corners.max(axis=0)
    for axis in range(3):
        c = centers[:, axis]
        sep |= (tri_max[axis] < c - reach) | (tri_min[axis] > c + reach)

    # Triangle plane.
    n = np.cross(edges[0], edges[1])
    r = reach * np.abs(n).sum()
    d = centers @ n - np.dot(n, v0)
    sep |= np.abs(d) > r

    # Nine edge cross axes.
    units = np.eye(3)
    for e in edges:
        for u in units:
            a = np.cross(e, u)
            norm = np.abs(a).sum()
            if norm < 1e-12:
                continue  # edge parallel to the box axis; other axes decide
            t = corners @ a
            r = reach * norm
            b = centers @ a
            sep |= (t.min() - b > r) | (t.max() - b < -r)

    return ~sep


def voxelize_object(mesh: TriMesh, resolution: int = DEFAULT_RESOLUTION) -> ObjectVoxelization:
    """Solid-voxelize a mesh on a ``resolution``-cube fitted to its extent."""
    resolution = int(resolution)
    if resolution < 2:
        raise ValidationError(f"resolution must be >= 2, got {resolution}")
    lo, hi = mesh.bounds()
    extent = hi - lo
    longest = float(extent.max())
    if longest <= 0:
        raise ValidationError("mesh has zero extent")
    s = longest / resolution
    half = s / 2

    surface = np.zeros((resolution, resolution, resolution), dtype=bool)
    axes = [np.arange(resolution)] * 3
    for corners in mesh.corners():
        t_lo = np.floor((corners.min(axis=0) - lo) / s - 1e-9).astype(np.int64)
        t_hi = np.floor((corners.max(axis=0) - lo) / s + 1e-9).astype(np.int64)
        t_lo = np.clip(t_lo, 0, resolution - 1)
        t_hi = np.clip(t_hi, 0, resolution - 1)
        ix, iy, iz = np.meshgrid(*(ax[l:h + 1] for ax, l, h in zip(axes, t_lo, t_hi)),
                                 indexing="ij")
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
        centers = lo + (idx + 0.5) * s
        hit = _triangle_box_overlap(corners, centers, half)
        surface[idx[hit, 0], idx[hit, 1], idx[hit, 2]] = True

    # Interior fill: empty components that never touch the grid boundary
    # are enclosed by surface and count as solid.
    empty = ~surface
    comp, n = ndimage.label(empty, structure=_FACE_STRUCTURE)
    if n:
        boundary_labels = np.unique(np.concatenate([
            comp[0].ravel(), comp[-1].ravel(),
            comp[:, 0].ravel(), comp[:, -1].ravel(),
            comp[:, :, 0].ravel(), comp[:, :, -1].ravel(),
        ]))
        outside = np.isin(comp, boundary_labels[boundary_labels > 0])
        occupied = surface | (empty & ~outside)
    else:
        occupied = surface
    return ObjectVoxelization(occupied, lo, s, resolution)
