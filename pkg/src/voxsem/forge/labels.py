"""Rasterize a scene into a per-voxel semantic label grid.

Room structure is painted first as one-voxel-thick slabs (windows replace
wall voxels inside their rectangles); objects are painted afterwards in
scene order, so objects win over structure and later objects win over
earlier ones. Everything else stays empty (label 0).
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .. import classes
from .._validation import ValidationError
from ..grid import GridSpec, VoxelGrid
from .scene import Scene
from .mesh import transformed_bounds


def _structure_labels(scene: Scene, spec: GridSpec, centers: np.ndarray) -> np.ndarray:
    room = scene.room
    vs = spec.voxel_size
    label = np.zeros(centers.shape[:-1], dtype=np.uint8)

    x, y, z = centers[..., 0], centers[..., 1], centers[..., 2]
    in_x = (x >= room.lo[0]) & (x < room.hi[0])
    in_y = (y >= room.lo[1]) & (y < room.hi[1])
    in_z = (z >= room.lo[2]) & (z < room.hi[2])
    in_room = in_x & in_y & in_z

    label[in_room & (y < room.lo[1] + vs)] = classes.FLOOR
    label[in_room & (y >= room.hi[1] - vs)] = classes.CEILING

    wall_slabs = {
        "x_min": in_room & (x < room.lo[0] + vs),
        "x_max": in_room & (x >= room.hi[0] - vs),
        "z_min": in_room & (z < room.lo[2] + vs),
        "z_max": in_room & (z >= room.hi[2] - vs),
    }
    for slab in wall_slabs.values():
        label[slab] = classes.WALL

    for w in scene.windows:
        along = x if w.wall in ("z_min", "z_max") else z
        mask = (wall_slabs[w.wall] & (label == classes.WALL)
                & (along >= w.a0) & (along < w.a1)
                & (y >= w.y0) & (y < w.y1))
        label[mask] = classes.WINDOW
    return label


def compose_scene_labels(scene: Scene, voxelizations: dict, spec: GridSpec) -> VoxelGrid:
    """Label every voxel of ``spec`` from the scene's geometry.

    ``voxelizations`` maps mesh_id to its ObjectVoxelization. A scene voxel
    takes an object's category when its center lands inside an occupied
    object voxel, or lies within one object-voxel size (scaled by the
    instance's largest scale factor) of the object's occupied shell.
    """
    for obj in scene.objects:
        if obj.mesh_id not in voxelizations:
            raise ValidationError(f"missing voxelization for mesh {obj.mesh_id!r}")

    centers = spec.voxel_centers()
    label = _structure_labels(scene, spec, centers)
    flat_centers = centers.reshape(-1, 3)
    dims = np.asarray(spec.dims)

    for obj in scene.objects:
        vox = voxelizations[obj.mesh_id]
        tf = obj.transform
        threshold = vox.voxel_size * float(tf.scale.max())

        b_lo, b_hi = transformed_bounds(scene.meshes[obj.mesh_id], tf)
        g_lo = np.floor((b_lo - threshold - np.asarray(spec.origin)) / spec.voxel_size)
        g_hi = np.floor((b_hi + threshold - np.asarray(spec.origin)) / spec.voxel_size)
        g_lo = np.clip(g_lo, 0, dims - 1).astype(np.int64)
        g_hi = np.clip(g_hi, 0, dims - 1).astype(np.int64)
        if np.any(g_hi < g_lo):
            continue
        ix, iy, iz = np.meshgrid(*(np.arange(l, h + 1) for l, h in zip(g_lo, g_hi)),
                                 indexing="ij")
        cand = (ix * dims[1] + iy) * dims[2] + iz
        cand = cand.ravel()
        pts = flat_centers[cand]

        local = tf.invert(pts)
        cell = np.floor((local - vox.origin) / vox.voxel_size).astype(np.int64)
        in_cube = np.all((cell >= 0) & (cell < vox.resolution), axis=1)
        inside = np.zeros(len(cand), dtype=bool)
        if in_cube.any():
            cc = cell[in_cube]
            inside[in_cube] = vox.occupied[cc[:, 0], cc[:, 1], cc[:, 2]]

        shell_world = tf.apply(vox.centers(vox.shell()))
        near = np.zeros(len(cand), dtype=bool)
        if shell_world.shape[0]:
            dist, _ = cKDTree(shell_world).query(pts, k=1,
                                                 distance_upper_bound=float(threshold))
            near = dist < threshold

        hit = inside | near
        flat = label.reshape(-1)
        flat[cand[hit]] = obj.category

    return VoxelGrid(spec, label)
