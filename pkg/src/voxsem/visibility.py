"""Classify voxels against a single depth view.

Each voxel center is projected into the camera; its depth along the optical
axis is compared with the observed depth at the pixel it lands in.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from ._validation import ValidationError, check_positive
from .camera import DepthMap, PinholeCamera
from .grid import Box, GridSpec, VoxelGrid


class VoxelState(IntEnum):
    OBSERVED_FREE = 0   # in front of the observed surface
    SURFACE = 1         # within the surface band of the observed depth
    OCCLUDED = 2        # behind the observed surface
    OUTSIDE_FOV = 3     # not observed: outside image, invalid depth, behind camera
    OUTSIDE_ROOM = 4    # outside the room bounds


def classify_voxels(depth: DepthMap, camera: PinholeCamera, spec: GridSpec,
                    room_bounds: Box | None = None,
                    surface_band: float | None = None) -> VoxelGrid:
    """Per-voxel visibility states for one view, as a uint8 VoxelGrid.

    ``surface_band`` is the half-width of the depth interval treated as
    surface; it defaults to one voxel size. Voxels outside ``room_bounds``
    are OUTSIDE_ROOM regardless of visibility.
    """
    if surface_band is None:
        surface_band = spec.voxel_size
    surface_band = check_positive(surface_band, "surface_band")
    if (depth.height, depth.width) != (camera.height, camera.width):
        raise ValidationError(
            f"depth {depth.values.shape} does not match camera "
            f"{(camera.height, camera.width)}")

    centers = spec.voxel_centers().reshape(-1, 3)
    u, v, z = camera.project(centers)
    states = np.full(centers.shape[0], VoxelState.OUTSIDE_FOV, dtype=np.uint8)

    ui = np.rint(u).astype(np.int64)
    vi = np.rint(v).astype(np.int64)
    observed = (z > 0) & (ui >= 0) & (ui < camera.width) & (vi >= 0) & (vi < camera.height)
    # Invalid (zero) depth pixels leave the voxel unobserved.
    d_obs = np.zeros(centers.shape[0])
    idx = np.nonzero(observed)[0]
    d_obs[idx] = depth.values[vi[idx], ui[idx]]
    observed &= d_obs > 0

    diff = z - d_obs
    states[observed & (diff < -surface_band)] = VoxelState.OBSERVED_FREE
    states[observed & (np.abs(diff) <= surface_band)] = VoxelState.SURFACE
    states[observed & (diff > surface_band)] = VoxelState.OCCLUDED

    if room_bounds is not None:
        states[~room_bounds.contains(centers)] = VoxelState.OUTSIDE_ROOM

    return VoxelGrid(spec, states.reshape(spec.dims))
