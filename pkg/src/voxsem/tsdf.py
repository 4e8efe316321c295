"""Truncated signed distance encodings of a single depth view.

Three encodings share one container:
  projective: per-voxel distance along the line of sight, observed depth
              minus voxel depth, clamped to [-d_max, d_max].
  accurate:   Euclidean distance to the nearest back-projected surface
              point, clamped to d_max, signed by visibility (negative in
              occluded space).
  flipped:    sign(d) * (d_max - |d|), so magnitude peaks at the surface
              and carries the view-dependent sign outward.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.spatial import cKDTree

from ._validation import ValidationError, check_positive
from .camera import DepthMap, PinholeCamera
from .grid import Box, GridSpec, VoxelGrid
from .visibility import VoxelState, classify_voxels


class TsdfMode(IntEnum):
    PROJECTIVE = 0
    ACCURATE = 1
    FLIPPED = 2


@dataclass
class TsdfGrid:
    """A float32 distance grid plus its truncation and encoding mode."""

    spec: GridSpec
    data: np.ndarray = field(repr=False)
    d_max: float = 0.24
    mode: TsdfMode = TsdfMode.PROJECTIVE

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.shape != tuple(self.spec.dims):
            raise ValidationError(
                f"data shape {self.data.shape} does not match spec dims {self.spec.dims}")
        self.d_max = check_positive(self.d_max, "d_max")
        self.mode = TsdfMode(self.mode)
        limit = self.d_max * (1 + 1e-5)
        if np.any(np.abs(self.data) > limit):
            raise ValidationError("TSDF values exceed the truncation distance")

    def as_grid(self) -> VoxelGrid:
        return VoxelGrid(self.spec, self.data)


def projective_tsdf(depth: DepthMap, camera: PinholeCamera, spec: GridSpec,
                    d_max: float = 0.24) -> TsdfGrid:
    """Line-of-sight TSDF: clamp(observed_depth - voxel_depth, +-d_max).

    Voxels with no observation (outside the image, behind the camera, or
    landing on an invalid pixel) read +d_max.
    """
    d_max = check_positive(d_max, "d_max")
    if (depth.height, depth.width) != (camera.height, camera.width):
        raise ValidationError(
            f"depth {depth.values.shape} does not match camera "
            f"{(camera.height, camera.width)}")
    centers = spec.voxel_centers().reshape(-1, 3)
    u, v, z = camera.project(centers)
    ui = np.rint(u).astype(np.int64)
    vi = np.rint(v).astype(np.int64)
    observed = (z > 0) & (ui >= 0) & (ui < camera.width) & (vi >= 0) & (vi < camera.height)
    idx = np.nonzero(observed)[0]
    d_obs = depth.values[vi[idx], ui[idx]]
    live = d_obs > 0

    values = np.full(centers.shape[0], d_max, dtype=np.float64)
    values[idx[live]] = np.clip(d_obs[live] - z[idx[live]], -d_max, d_max)
    return TsdfGrid(spec, values.reshape(spec.dims).astype(np.float32),
                    d_max=d_max, mode=TsdfMode.PROJECTIVE)


def accurate_tsdf(depth: DepthMap, camera: PinholeCamera, spec: GridSpec,
                  d_max: float = 0.24, states: VoxelGrid | None = None,
                  room_bounds: Box | None = None,
                  surface_band: float | None = None) -> TsdfGrid:
    """Euclidean TSDF against the observed surface point cloud.

    Magnitude is the distance from the voxel center to the nearest valid
    back-projected depth pixel, clamped to d_max. Sign comes from the
    visibility states: negative in occluded space, positive elsewhere.
    Voxels outside the room read +d_max.
    """
    d_max = check_positive(d_max, "d_max")
    if states is None:
        states = classify_voxels(depth, camera, spec, room_bounds=room_bounds,
                                 surface_band=surface_band)
    elif states.spec != spec:
        raise ValidationError("states grid does not match the requested spec")

    surface = depth.points(camera)
    if surface.shape[0] == 0:
        raise ValidationError("no observed surface: depth map has no valid pixels")

    centers = spec.voxel_centers().reshape(-1, 3)
    dist, _ = cKDTree(surface).query(centers, k=1, distance_upper_bound=float(d_max))
    dist = np.minimum(dist, d_max)  # no-neighbor queries come back inf

    st = states.data.reshape(-1)
    sign = np.where(st == VoxelState.OCCLUDED, -1.0, 1.0)
    values = sign * dist
    values[st == VoxelState.OUTSIDE_ROOM] = d_max
    return TsdfGrid(spec, values.reshape(spec.dims).astype(np.float32),
                    d_max=d_max, mode=TsdfMode.ACCURATE)


def flip_tsdf(tsdf: TsdfGrid) -> TsdfGrid:
    """Flipped encoding: sign(d) * (d_max - |d|) with sign(0) = +1.

    Already-flipped input is rejected; flipping is not an involution here.
    """
    if tsdf.mode == TsdfMode.FLIPPED:
        raise ValidationError("grid is already flipped")
    # Single-precision throughout so values at the truncation bound flip
    # to exactly zero.
    m = np.float32(tsdf.d_max)
    d = tsdf.data
    flipped = np.where(d >= 0, m - d, -(m + d)).astype(np.float32)
    return TsdfGrid(tsdf.spec, flipped, d_max=tsdf.d_max, mode=TsdfMode.FLIPPED)


def normalize_tsdf(tsdf: TsdfGrid) -> VoxelGrid:
    """Scale values into [-1, 1] for network input."""
    return VoxelGrid(tsdf.spec, (tsdf.data / tsdf.d_max).astype(np.float32))
