"""Voxel visibility classification against single views."""
import numpy as np
import pytest

from oracles import ray_march_occluded_count
from voxsem.camera import DepthMap, PinholeCamera, camera_at
from voxsem.grid import Box, GridSpec
from voxsem.visibility import VoxelState, classify_voxels


def wall_camera(width=64, height=48):
    """Identity-pose camera at the origin looking down +z."""
    return PinholeCamera.kinect(width=width, height=height)


def flat_wall_depth(cam, distance):
    return DepthMap(np.full((cam.height, cam.width), float(distance)))


class TestClassifyVoxels:
    def test_front_and_behind_wall(self):
        cam = wall_camera()
        depth = flat_wall_depth(cam, 2.0)
        # Two single-voxel grids: one 1 m before the wall, one 1 m behind.
        spec_front = GridSpec((-0.05, -0.05, 0.95), 0.1, (1, 1, 1))
        spec_behind = GridSpec((-0.05, -0.05, 2.95), 0.1, (1, 1, 1))
        front = classify_voxels(depth, cam, spec_front)
        behind = classify_voxels(depth, cam, spec_behind)
        assert front.data[0, 0, 0] == VoxelState.OBSERVED_FREE
        assert behind.data[0, 0, 0] == VoxelState.OCCLUDED

    def test_surface_band_default_one_voxel(self):
        cam = wall_camera()
        depth = flat_wall_depth(cam, 2.0)
        spec = GridSpec((-0.05, -0.05, 0.0), 0.1, (1, 1, 40))
        states = classify_voxels(depth, cam, spec).data[0, 0]
        # Voxel centers at z = 0.05 + 0.1 k; |z - 2.0| <= 0.1 holds for k = 19 and 20.
        assert states[19] == VoxelState.SURFACE
        assert states[20] == VoxelState.SURFACE
        assert states[18] == VoxelState.OBSERVED_FREE
        assert states[21] == VoxelState.OCCLUDED

    def test_partition_is_total(self):
        cam = wall_camera()
        rng = np.random.default_rng(11)
        values = np.clip(rng.normal(2.5, 0.4, (cam.height, cam.width)), 0.5, None)
        values[rng.random(values.shape) < 0.05] = 0.0
        spec = GridSpec((-1.6, -1.2, 0.0), 0.1, (32, 24, 40))
        states = classify_voxels(DepthMap(values), cam, spec,
                                 room_bounds=Box((-1, -1, 0.2), (1, 1, 3.0)))
        valid = {int(s) for s in VoxelState}
        assert set(np.unique(states.data)).issubset(valid)

    def test_room_bounds_override(self):
        cam = wall_camera()
        depth = flat_wall_depth(cam, 2.0)
        spec = GridSpec((-0.05, -0.05, 0.95), 0.1, (1, 1, 1))
        room_far = Box((5, 5, 5), (6, 6, 6))
        states = classify_voxels(depth, cam, spec, room_bounds=room_far)
        assert states.data[0, 0, 0] == VoxelState.OUTSIDE_ROOM

    def test_invalid_depth_pixel_is_outside_fov(self):
        cam = wall_camera()
        values = np.full((cam.height, cam.width), 2.0)
        values[:, :] = 0.0
        spec = GridSpec((-0.05, -0.05, 0.95), 0.1, (1, 1, 1))
        states = classify_voxels(DepthMap(values), cam, spec)
        assert states.data[0, 0, 0] == VoxelState.OUTSIDE_FOV

    def test_behind_camera_is_outside_fov(self):
        cam = wall_camera()
        depth = flat_wall_depth(cam, 2.0)
        spec = GridSpec((-0.05, -0.05, -1.0), 0.1, (1, 1, 1))
        states = classify_voxels(depth, cam, spec)
        assert states.data[0, 0, 0] == VoxelState.OUTSIDE_FOV

    def test_occluded_count_matches_ray_march(self):
        # Flat wall filling the frame: per-voxel oracle agrees exactly.
        cam = wall_camera(width=32, height=24)
        depth = flat_wall_depth(cam, 1.6)
        spec = GridSpec((-1.6, -1.2, 0.0), 0.1, (32, 32, 32))
        states = classify_voxels(depth, cam, spec)
        got = int((states.data == VoxelState.OCCLUDED).sum())
        want = ray_march_occluded_count(depth, cam, spec, spec.voxel_size)
        assert got == want

    def test_ray_monotonicity(self):
        # Along each pixel's ray: free, then surface, then occluded.
        cam = wall_camera(width=48, height=36)
        rng = np.random.default_rng(7)
        values = np.clip(2.2 + 0.3 * rng.standard_normal((cam.height, cam.width)),
                         1.0, 3.5)
        depth = DepthMap(values)
        spec = GridSpec((-1.2, -0.9, 0.3), 0.06, (40, 30, 50))
        states = classify_voxels(depth, cam, spec)

        centers = spec.voxel_centers().reshape(-1, 3)
        u, v, z = cam.project(centers)
        ui = np.rint(u).astype(int)
        vi = np.rint(v).astype(int)
        flat = states.data.reshape(-1)
        order = {VoxelState.OBSERVED_FREE: 0, VoxelState.SURFACE: 1,
                 VoxelState.OCCLUDED: 2}
        checked = 0
        for pix in [(10, 10), (20, 5), (30, 30), (5, 25), (40, 18)]:
            on_ray = np.nonzero((ui == pix[0]) & (vi == pix[1]) & (z > 0))[0]
            seq = [order[flat[i]] for i in on_ray[np.argsort(z[on_ray])]
                   if flat[i] in order]
            assert seq == sorted(seq), f"non-monotone states along pixel {pix}"
            checked += len(seq)
        assert checked > 0

    def test_depth_camera_mismatch_rejected(self):
        cam = wall_camera()
        from voxsem._validation import ValidationError

        with pytest.raises(ValidationError):
            classify_voxels(DepthMap(np.ones((10, 10))), cam,
                            GridSpec((0, 0, 0), 0.1, (2, 2, 2)))
