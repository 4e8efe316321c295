"""Distance encodings: projective, accurate, and flipped TSDFs."""
import numpy as np
import pytest

from oracles import brute_force_accurate_tsdf
from voxsem.camera import DepthMap, PinholeCamera, camera_at
from voxsem.grid import GridSpec, VoxelGrid
from voxsem.tsdf import (
    TsdfGrid,
    TsdfMode,
    accurate_tsdf,
    flip_tsdf,
    normalize_tsdf,
    projective_tsdf,
)
from voxsem.visibility import VoxelState, classify_voxels
from voxsem._validation import ValidationError

D_MAX = 0.24


def lattice_camera():
    """Camera whose pixel rays at depth 2.0 land exactly on 0.025 m steps.

    fx = fy = 80 with integer principal point makes the back-projected
    samples of a flat wall at z = 2 an exact 0.025 m lattice, so voxel
    centers placed on that lattice see a surface point with zero lateral
    offset and the nearest-point distance reduces to the depth gap.
    """
    return PinholeCamera(fx=80.0, fy=80.0, cx=80.0, cy=60.0,
                         width=160, height=120,
                         translation=np.array([0.0, 1.5, 0.0]))


def lattice_spec():
    # Centers at x in {-0.375..0.375}, y - 1.5 likewise, z = 0.825 + 0.05 k.
    return GridSpec((-0.4, 1.1, 0.8), 0.05, (16, 16, 32))


def wall_depth(cam, distance=2.0):
    return DepthMap(np.full((cam.height, cam.width), float(distance)))


def single_voxel(center, voxel_size=0.05):
    h = voxel_size / 2
    return GridSpec((center[0] - h, center[1] - h, center[2] - h),
                    voxel_size, (1, 1, 1))


def tilted_plane_depth(cam, z0=2.0, slope=1.0, z_far=6.0):
    """Depth of the plane z = z0 + slope * x; pixels past z_far invalid.

    Assumes an identity-rotation camera (slope is applied along image x);
    use plane_depth_for when the camera has a nontrivial pose.
    """
    u = np.arange(cam.width, dtype=np.float64)
    a = slope * (u - cam.cx) / cam.fx
    with np.errstate(divide="ignore"):
        z = np.where(a < 1.0, z0 / (1.0 - a), 0.0)
    z = np.where((z > 0) & (z <= z_far), z, 0.0)
    return DepthMap(np.broadcast_to(z, (cam.height, cam.width)).copy())


class TestProjective:
    def test_on_surface_is_zero(self):
        cam = lattice_camera()
        t = projective_tsdf(wall_depth(cam), cam, single_voxel((0, 1.5, 2.0)), D_MAX)
        assert t.data[0, 0, 0] == 0.0

    def test_ten_centimeters_in_front(self):
        cam = lattice_camera()
        t = projective_tsdf(wall_depth(cam), cam, single_voxel((0, 1.5, 1.9)), D_MAX)
        assert t.data[0, 0, 0] == pytest.approx(0.10, abs=1e-7)

    def test_clamped_both_sides(self):
        cam = lattice_camera()
        front = projective_tsdf(wall_depth(cam), cam, single_voxel((0, 1.5, 1.0)), D_MAX)
        behind = projective_tsdf(wall_depth(cam), cam, single_voxel((0, 1.5, 3.0)), D_MAX)
        assert front.data[0, 0, 0] == pytest.approx(D_MAX)
        assert behind.data[0, 0, 0] == pytest.approx(-D_MAX)

    def test_unobserved_voxel_reads_d_max(self):
        cam = lattice_camera()
        behind_camera = projective_tsdf(
            wall_depth(cam), cam, single_voxel((0, 1.5, -1.0)), D_MAX)
        assert behind_camera.data[0, 0, 0] == pytest.approx(D_MAX)

        holes = np.full((cam.height, cam.width), 2.0)
        holes[59:62, 79:82] = 0.0  # kill the pixels the voxel lands on
        hole_hit = projective_tsdf(
            DepthMap(holes), cam, single_voxel((0, 1.5, 1.9)), D_MAX)
        assert hole_hit.data[0, 0, 0] == pytest.approx(D_MAX)

    def test_size_mismatch_rejected(self):
        cam = lattice_camera()
        bad = DepthMap(np.full((cam.height, cam.width + 1), 2.0))
        with pytest.raises(ValidationError):
            projective_tsdf(bad, cam, lattice_spec(), D_MAX)


class TestAccurate:
    def test_matches_brute_force_on_tilted_plane(self):
        cam = PinholeCamera.kinect(width=160, height=120,
                                   translation=np.array([0.0, 1.5, 0.0]))
        depth = tilted_plane_depth(cam, z0=2.0, slope=1.0)
        spec = GridSpec((-0.8, 0.7, 1.0), 0.05, (32, 32, 32))
        states = classify_voxels(depth, cam, spec)
        got = accurate_tsdf(depth, cam, spec, D_MAX, states=states)
        want = brute_force_accurate_tsdf(depth, cam, spec, D_MAX, states)
        assert np.abs(got.data.astype(np.float64) - want).max() < 1e-6

    def test_far_voxels_truncate_exactly(self):
        cam = lattice_camera()
        spec = lattice_spec()
        t = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX)
        centers_z = spec.voxel_centers()[..., 2]
        far_free = centers_z < 2.0 - D_MAX - 0.05
        far_hidden = centers_z > 2.0 + D_MAX + 0.05
        assert far_free.any() and far_hidden.any()
        assert np.all(t.data[far_free] == np.float32(D_MAX))
        assert np.all(t.data[far_hidden] == np.float32(-D_MAX))

    def test_surface_voxels_within_half_diagonal(self):
        cam = lattice_camera()
        spec = lattice_spec()
        states = classify_voxels(wall_depth(cam), cam, spec)
        t = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX, states=states)
        at_surface = states.data == VoxelState.SURFACE
        # Layers at z = 1.975 and 2.025 straddle the wall.
        assert set(np.nonzero(at_surface)[2].tolist()) == {23, 24}
        bound = 0.05 * np.sqrt(3) / 2
        assert np.abs(t.data[at_surface]).max() <= bound

    def test_sample_bearing_voxels_within_half_diagonal(self):
        # Any voxel that actually contains a back-projected point is within
        # half a cube diagonal of it, regardless of alignment.
        cam = PinholeCamera.kinect(width=160, height=120,
                                   translation=np.array([0.0, 1.5, 0.0]))
        depth = tilted_plane_depth(cam, z0=2.0, slope=1.0)
        spec = GridSpec((-0.8, 0.7, 1.0), 0.05, (32, 32, 32))
        t = accurate_tsdf(depth, cam, spec, D_MAX)
        pts = depth.points(cam)
        idx = np.floor((pts - np.array(spec.origin)) / spec.voxel_size).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(spec.dims)), axis=1)
        assert inside.any()
        holds = np.zeros(spec.dims, dtype=bool)
        holds[tuple(idx[inside].T)] = True
        bound = spec.voxel_size * np.sqrt(3) / 2
        assert np.abs(t.data[holds]).max() <= bound + 1e-7

    def test_fronto_parallel_matches_projective(self):
        # On the aligned lattice every voxel center sees a surface sample
        # straight ahead, so the Euclidean and line-of-sight distances
        # coincide. A hairline surface band keeps the sign split at the
        # wall identical between the two encodings.
        cam = lattice_camera()
        spec = lattice_spec()
        depth = wall_depth(cam)
        proj = projective_tsdf(depth, cam, spec, D_MAX)
        states = classify_voxels(depth, cam, spec, surface_band=1e-9)
        acc = accurate_tsdf(depth, cam, spec, D_MAX, states=states)
        assert np.abs(acc.data - proj.data).max() < 1e-6

    def test_occluded_voxels_negative(self):
        cam = lattice_camera()
        spec = lattice_spec()
        states = classify_voxels(wall_depth(cam), cam, spec)
        t = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX, states=states)
        hidden = states.data == VoxelState.OCCLUDED
        assert hidden.any()
        assert np.all(t.data[hidden] < 0)

    def test_outside_room_reads_positive_d_max(self):
        cam = lattice_camera()
        spec = lattice_spec()
        from voxsem.grid import Box
        room = Box((-0.4, 1.1, 0.8), (0.4, 1.9, 2.1))  # clips the far end
        states = classify_voxels(wall_depth(cam), cam, spec, room_bounds=room)
        t = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX, states=states)
        outside = states.data == VoxelState.OUTSIDE_ROOM
        assert outside.any()
        assert np.all(t.data[outside] == np.float32(D_MAX))

    def test_empty_depth_map_rejected(self):
        cam = lattice_camera()
        empty = DepthMap(np.zeros((cam.height, cam.width)))
        with pytest.raises(ValidationError, match="no observed surface"):
            accurate_tsdf(empty, cam, lattice_spec(), D_MAX)

    def test_mismatched_states_rejected(self):
        cam = lattice_camera()
        other = GridSpec((0, 0, 0), 0.05, (4, 4, 4))
        states = VoxelGrid.zeros(other, dtype=np.uint8)
        with pytest.raises(ValidationError):
            accurate_tsdf(wall_depth(cam), cam, lattice_spec(), D_MAX, states=states)

    def test_view_independent_magnitudes(self):
        # Two cameras, one head-on and one swung sideways, looking at the
        # same slanted wall. Accurate magnitudes agree to within a voxel;
        # projective values are measured along each camera's own rays and
        # drift far more.
        spec = GridSpec((-0.4, 1.1, 1.5), 0.05, (16, 16, 16))
        cam_a = camera_at((0.0, 1.5, 0.0), yaw=0.0, tilt=0.0, width=160, height=120)
        cam_b = camera_at((1.2, 1.5, 0.2), yaw=-0.5, tilt=0.0, width=160, height=120)
        depth_a = DepthMap(plane_depth_for(cam_a, z0=2.0, slope=1.0))
        depth_b = DepthMap(plane_depth_for(cam_b, z0=2.0, slope=1.0))

        st_a = classify_voxels(depth_a, cam_a, spec)
        st_b = classify_voxels(depth_b, cam_b, spec)
        seen = np.isin(st_a.data, (0, 1, 2)) & np.isin(st_b.data, (0, 1, 2))
        assert seen.sum() > 200

        acc_a = accurate_tsdf(depth_a, cam_a, spec, D_MAX, states=st_a)
        acc_b = accurate_tsdf(depth_b, cam_b, spec, D_MAX, states=st_b)
        acc_gap = np.abs(np.abs(acc_a.data) - np.abs(acc_b.data))[seen].max()
        assert acc_gap <= spec.voxel_size

        proj_a = projective_tsdf(depth_a, cam_a, spec, D_MAX)
        proj_b = projective_tsdf(depth_b, cam_b, spec, D_MAX)
        proj_gap = np.abs(proj_a.data - proj_b.data)[seen].max()
        assert proj_gap > 2 * acc_gap


def plane_depth_for(cam, z0=2.0, slope=1.0, z_far=6.0):
    """Per-pixel depth of the world plane z = z0 + slope * x for any pose."""
    u, v = np.meshgrid(np.arange(cam.width, dtype=np.float64),
                       np.arange(cam.height, dtype=np.float64))
    dirs_cam = np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy,
                         np.ones_like(u)], axis=-1)
    dirs = dirs_cam @ cam.rotation.T
    pos = cam.position
    denom = dirs[..., 2] - slope * dirs[..., 0]
    num = z0 + slope * pos[0] - pos[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-9, num / denom, 0.0)
    z = np.where((t > 0) & (t <= z_far), t, 0.0)
    return z


class TestFlip:
    def test_formula_fixed_points(self):
        spec = GridSpec((0, 0, 0), 0.05, (2, 1, 1))
        t = TsdfGrid(spec, np.array([[[D_MAX]], [[0.0]]]), d_max=D_MAX,
                     mode=TsdfMode.ACCURATE)
        f = flip_tsdf(t)
        assert f.data[0, 0, 0] == pytest.approx(0.0)      # far free space
        assert f.data[1, 0, 0] == pytest.approx(D_MAX)    # on the surface
        assert f.mode == TsdfMode.FLIPPED

    def test_negative_branch(self):
        spec = GridSpec((0, 0, 0), 0.05, (2, 1, 1))
        t = TsdfGrid(spec, np.array([[[-0.06]], [[-D_MAX]]]), d_max=D_MAX,
                     mode=TsdfMode.ACCURATE)
        f = flip_tsdf(t)
        assert f.data[0, 0, 0] == pytest.approx(-0.18, abs=1e-7)
        assert f.data[1, 0, 0] == pytest.approx(0.0)

    def test_already_flipped_rejected(self):
        spec = GridSpec((0, 0, 0), 0.05, (1, 1, 1))
        f = TsdfGrid(spec, np.zeros((1, 1, 1)), d_max=D_MAX, mode=TsdfMode.FLIPPED)
        with pytest.raises(ValidationError, match="flipped"):
            flip_tsdf(f)

    def test_projective_input_allowed(self):
        cam = lattice_camera()
        t = projective_tsdf(wall_depth(cam), cam, lattice_spec(), D_MAX)
        assert flip_tsdf(t).mode == TsdfMode.FLIPPED

    def test_strongest_jump_straddles_surface(self):
        cam = lattice_camera()
        spec = lattice_spec()
        states = classify_voxels(wall_depth(cam), cam, spec)
        acc = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX, states=states)
        flipped = flip_tsdf(acc).data

        diffs = np.abs(np.diff(flipped, axis=2))
        k = int(np.unravel_index(np.argmax(diffs), diffs.shape)[2])
        # The winning pair must change sign across the wall at z = 2.
        lo = flipped[:, :, k]
        hi = flipped[:, :, k + 1]
        top = diffs.max()
        assert top >= 1.5 * D_MAX
        winners = diffs[:, :, k] == top
        assert np.all(np.sign(lo[winners]) != np.sign(hi[winners]))

    def test_unflipped_smooth_in_hidden_space(self):
        # Away from the surface the accurate field is 1-Lipschitz, so
        # neighboring occluded voxels never differ by more than the step.
        cam = lattice_camera()
        spec = lattice_spec()
        states = classify_voxels(wall_depth(cam), cam, spec)
        acc = accurate_tsdf(wall_depth(cam), cam, spec, D_MAX, states=states)
        hidden = states.data == VoxelState.OCCLUDED
        pair = hidden[:, :, :-1] & hidden[:, :, 1:]
        assert pair.any()
        diffs = np.abs(np.diff(acc.data, axis=2))[pair]
        assert diffs.max() <= spec.voxel_size + 1e-6


class TestNormalize:
    def test_examples(self):
        spec = GridSpec((0, 0, 0), 0.05, (3, 1, 1))
        t = TsdfGrid(spec, np.array([[[D_MAX]], [[0.0]], [[-0.12]]]),
                     d_max=D_MAX, mode=TsdfMode.ACCURATE)
        n = normalize_tsdf(t)
        assert n.data[0, 0, 0] == pytest.approx(1.0)
        assert n.data[1, 0, 0] == pytest.approx(0.0)
        assert n.data[2, 0, 0] == pytest.approx(-0.5)

    def test_range(self):
        cam = lattice_camera()
        t = accurate_tsdf(wall_depth(cam), cam, lattice_spec(), D_MAX)
        n = normalize_tsdf(flip_tsdf(t))
        assert np.abs(n.data).max() <= 1.0 + 1e-6


class TestTsdfGrid:
    def test_out_of_range_rejected(self):
        spec = GridSpec((0, 0, 0), 0.05, (1, 1, 1))
        with pytest.raises(ValidationError, match="truncation"):
            TsdfGrid(spec, np.array([[[0.5]]]), d_max=D_MAX)

    def test_shape_mismatch_rejected(self):
        spec = GridSpec((0, 0, 0), 0.05, (2, 2, 2))
        with pytest.raises(ValidationError):
            TsdfGrid(spec, np.zeros((2, 2)), d_max=D_MAX)
