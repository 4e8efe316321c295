"""Scene label composition: structure slabs, object painting, precedence."""
import numpy as np
import pytest

from voxsem import classes
from voxsem._validation import ValidationError
from voxsem.forge.labels import compose_scene_labels
from voxsem.forge.mesh import SimilarityTransform
from voxsem.forge.scene import (Scene, SceneObject, SceneParams, WindowRect,
                                generate_scene, proxy_mesh_library)
from voxsem.forge.voxelize import voxelize_object
from voxsem.grid import Box, GridSpec


def empty_room(size=(3.0, 2.5, 3.0)) -> Scene:
    return Scene(room=Box((0, 0, 0), size), windows=[], objects=[], meshes={})


class TestStructure:
    SPEC = GridSpec((0, 0, 0), 0.05, (60, 50, 60))

    def test_slabs_one_voxel_thick(self):
        labels = compose_scene_labels(empty_room(), {}, self.SPEC).data
        assert np.all(labels[1:-1, 0, 1:-1] == classes.FLOOR)
        assert np.all(labels[1:-1, -1, 1:-1] == classes.CEILING)
        assert np.all(labels[0, :, :] == classes.WALL)
        assert np.all(labels[-1, :, :] == classes.WALL)
        assert np.all(labels[:, :, 0] == classes.WALL)
        assert np.all(labels[:, :, -1] == classes.WALL)
        # second layers are already interior
        assert np.all(labels[1:-1, 1, 1:-1] == classes.EMPTY)
        assert np.all(labels[1:-1, 1:-1, 1:-1] == classes.EMPTY)

    def test_window_replaces_wall_voxels(self):
        scene = Scene(room=Box((0, 0, 0), (3.0, 2.5, 3.0)),
                      windows=[WindowRect("x_min", 1.0, 2.0, 0.9, 1.8)],
                      objects=[], meshes={})
        labels = compose_scene_labels(scene, {}, self.SPEC).data
        win = labels == classes.WINDOW
        assert win.sum() == 20 * 18
        assert np.all(np.nonzero(win)[0] == 0)
        assert labels[0, 24, 30] == classes.WINDOW
        assert labels[0, 24, 10] == classes.WALL


class TestObjectPainting:
    def test_bed_matches_containment_oracle(self):
        lib = proxy_mesh_library()
        tf = SimilarityTransform(yaw=0.3, scale=(0.9, 1.0, 1.1),
                                 translation=(2.1, 0.0, 2.3))
        scene = Scene(room=Box((0, 0, 0), (5.0, 2.7, 5.0)), windows=[],
                      objects=[SceneObject("bed", classes.BED, tf)],
                      meshes={"bed": lib["bed"]})
        vox = {"bed": voxelize_object(lib["bed"])}
        spec = GridSpec((0, 0, 0), 0.05, (100, 54, 100))
        labels = compose_scene_labels(scene, vox, spec).data

        centers = spec.voxel_centers().reshape(-1, 3)
        local = tf.invert(centers)
        half = np.array([1.55 / 2, 0.0, 2.05 / 2])
        lo = np.array([-half[0], 0.0, -half[2]])
        hi = np.array([half[0], 0.55, half[2]])
        margin = (2.05 / 128) * 1.1 + 0.05 * np.sqrt(3) / 2

        deep_inside = np.all((local >= lo + margin) & (local <= hi - margin),
                             axis=1).reshape(spec.dims)
        near_box = np.all((local >= lo - margin) & (local <= hi + margin),
                          axis=1).reshape(spec.dims)
        bed = labels == classes.BED
        assert deep_inside.any()
        assert np.all(bed[deep_inside])
        assert np.all(near_box[bed])

    def test_object_overwrites_structure(self):
        lib = proxy_mesh_library()
        # bed pushed into the wall slab: its label wins over the wall's
        tf = SimilarityTransform(translation=(0.776, 0.0, 2.0))
        scene = Scene(room=Box((0, 0, 0), (5.0, 2.7, 5.0)), windows=[],
                      objects=[SceneObject("bed", classes.BED, tf)],
                      meshes={"bed": lib["bed"]})
        vox = {"bed": voxelize_object(lib["bed"])}
        spec = GridSpec((0, 0, 0), 0.05, (100, 54, 100))
        labels = compose_scene_labels(scene, vox, spec).data
        # wall column at x index 0, bed height, bed z-range
        assert np.all(labels[0, 2:9, 30:50] == classes.BED)
        assert np.all(labels[0, 2:9, 5:15] == classes.WALL)

    def test_later_object_wins_contested_voxels(self):
        lib = proxy_mesh_library()
        mesh = lib["object_box"]
        # two boxes stacked face to face; the contact plane y = 0.725 runs
        # exactly through a row of voxel centers, which both dilation
        # shells reach, so scene order decides those voxels
        low = SceneObject("object_box", classes.TVS,
                          SimilarityTransform(translation=(2.0, 0.345, 2.0)))
        high = SceneObject("object_box", classes.OBJECTS,
                           SimilarityTransform(translation=(2.0, 0.725, 2.0)))
        vox = {"object_box": voxelize_object(mesh)}
        spec = GridSpec((1.7, 0.0, 1.7), 0.05, (12, 24, 12))
        room = Box((0, 0, 0), (4.0, 2.7, 4.0))

        def paint(order):
            scene = Scene(room=room, windows=[], objects=order,
                          meshes={"object_box": mesh})
            return compose_scene_labels(scene, vox, spec).data

        a = paint([low, high])
        b = paint([high, low])
        contested = (a != b)
        assert contested.any()
        ys = np.nonzero(contested)[1]
        assert set(ys.tolist()) == {14}
        assert np.all(a[contested] == classes.OBJECTS)
        assert np.all(b[contested] == classes.TVS)

    def test_missing_voxelization_rejected(self):
        lib = proxy_mesh_library()
        tf = SimilarityTransform(translation=(2.0, 0.0, 2.0))
        scene = Scene(room=Box((0, 0, 0), (5.0, 2.7, 5.0)), windows=[],
                      objects=[SceneObject("bed", classes.BED, tf)],
                      meshes={"bed": lib["bed"]})
        with pytest.raises(ValidationError, match="missing voxelization"):
            compose_scene_labels(scene, {}, GridSpec((0, 0, 0), 0.1, (50, 27, 50)))


class TestLabelSupport:
    def test_labels_confined_to_objects_and_planes(self):
        scene = generate_scene(SceneParams(), 0)
        vox = {k: voxelize_object(m) for k, m in scene.meshes.items()}
        voxel = 0.06
        dims = tuple(int(np.ceil(s / voxel)) for s in scene.room.size)
        spec = GridSpec(tuple(scene.room.lo), voxel, dims)
        labels = compose_scene_labels(scene, vox, spec).data

        centers = spec.voxel_centers()
        room = scene.room
        in_room = np.all((centers >= room.lo) & (centers < room.hi), axis=-1)
        near_face = np.zeros(spec.dims, dtype=bool)
        for axis in range(3):
            c = centers[..., axis]
            near_face |= (c < room.lo[axis] + voxel) | (c >= room.hi[axis] - voxel)
        allowed = in_room & near_face
        for obj, box in zip(scene.objects, scene.object_bounds()):
            s = vox[obj.mesh_id].voxel_size
            pad = s * float(obj.transform.scale.max()) + voxel * np.sqrt(3) / 2
            inside = np.all((centers >= box.lo - pad) & (centers <= box.hi + pad),
                            axis=-1)
            allowed |= inside
        assert not labels[~allowed].any()
