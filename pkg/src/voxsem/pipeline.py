"""End-to-end orchestration shared by the command-line tools.

Ties a rendered view to its voxel grid, runs generation over many scenes,
and assembles training manifests.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ._validation import ValidationError
from .camera import DepthMap, PinholeCamera
from .forge.cameras import sample_cameras
from .forge.labels import compose_scene_labels
from .forge.scene import Scene, SceneParams, generate_scene
from .forge.voxelize import voxelize_object
from .grid import Box, GridSpec
from . import io as vio
from .rng import stream
from .tsdf import TsdfMode, accurate_tsdf, flip_tsdf
from .visibility import classify_voxels

# Fraction of the grid's forward extent kept behind the camera.
BACK_MARGIN = 0.1


@dataclass
class ViewGeometry:
    """Everything needed to encode one view: camera, grid, room, truncation."""

    camera: PinholeCamera
    grid: GridSpec
    room: Box
    d_max: float

    def to_json(self) -> dict:
        return {"camera": self.camera.to_json(), "grid": self.grid.to_json(),
                "room": self.room.to_json(), "d_max": self.d_max}

    @classmethod
    def from_json(cls, obj: dict) -> "ViewGeometry":
        return cls(PinholeCamera.from_json(obj["camera"]),
                   GridSpec.from_json(obj["grid"]),
                   Box.from_json(obj["room"]), float(obj["d_max"]))


def view_grid_spec(camera: PinholeCamera, dims, voxel_size: float,
                   floor_y: float) -> GridSpec:
    """Axis-aligned grid in front of a camera.

    The grid's long axis snaps to the dominant horizontal component of the
    camera's forward direction; a small back margin keeps near geometry
    inside. Vertically the grid starts at the floor.
    """
    dims = tuple(int(d) for d in dims)
    extent = np.asarray(dims, dtype=np.float64) * voxel_size
    fwd = camera.forward
    pos = camera.position

    if abs(fwd[0]) >= abs(fwd[2]):
        axis, lateral = 0, 2
    else:
        axis, lateral = 2, 0
    origin = np.zeros(3)
    if fwd[axis] >= 0:
        origin[axis] = pos[axis] - BACK_MARGIN * extent[axis]
    else:
        origin[axis] = pos[axis] - (1 - BACK_MARGIN) * extent[axis]
    origin[lateral] = pos[lateral] - extent[lateral] / 2
    origin[1] = float(floor_y)
    return GridSpec(tuple(origin), voxel_size, dims)


@dataclass
class ForgeConfig:
    out_dir: str
    seed: int
    scenes: int = 1
    views_per_scene: int = 5
    dims: tuple = (64, 32, 64)
    voxel_size: float = 0.075
    d_max: float = 0.9
    width: int = 640
    height: int = 480
    encode: bool = True
    params: SceneParams | None = None


def _encode_view(depth: DepthMap, geo: ViewGeometry):
    """Visibility states plus the flipped accurate TSDF for one view."""
    states = classify_voxels(depth, geo.camera, geo.grid, room_bounds=geo.room)
    tsdf = accurate_tsdf(depth, geo.camera, geo.grid, d_max=geo.d_max, states=states)
    return states, flip_tsdf(tsdf)


def forge_dataset(config: ForgeConfig) -> dict:
    """Generate scenes, sample views, write artifacts, return the manifest.

    Raises when every rendered candidate view across all scenes fails the
    acceptance criteria (an empty dataset would poison training silently).
    """
    params = config.params or SceneParams()
    os.makedirs(config.out_dir, exist_ok=True)
    vox_cache = {}
    manifest_views = []
    scene_files = []

    for si in range(int(config.scenes)):
        scene_seed = int(stream(config.seed, "forge-scene", si).integers(0, 2 ** 31))
        scene = generate_scene(params, scene_seed)
        scene_name = f"scene_{si:03d}"
        scene_path = os.path.join(config.out_dir, f"{scene_name}.json")
        vio.write_json(scene_path, scene.to_json())
        scene_files.append(os.path.basename(scene_path))

        for mesh_id, mesh in scene.meshes.items():
            if mesh_id not in vox_cache:
                vox_cache[mesh_id] = voxelize_object(mesh)

        views = sample_cameras(scene, scene_seed, max_views=config.views_per_scene,
                               width=config.width, height=config.height)
        for vi, view in enumerate(views):
            geo = ViewGeometry(
                camera=view.camera,
                grid=view_grid_spec(view.camera, config.dims, config.voxel_size,
                                    floor_y=scene.room.lo[1]),
                room=scene.room, d_max=config.d_max)
            stem = f"{scene_name}_view_{vi:02d}"

            depth_file = f"{stem}_depth.png"
            vio.write_depth_png(os.path.join(config.out_dir, depth_file), view.depth)
            cam_file = f"{stem}_camera.json"
            vio.write_json(os.path.join(config.out_dir, cam_file), geo.to_json())
            # Encode from the depth as stored: the PNG quantizes to 1 mm,
            # and re-encoding the dataset must reproduce these volumes.
            depth = vio.read_depth_png(os.path.join(config.out_dir, depth_file))

            labels = compose_scene_labels(scene, vox_cache, geo.grid)
            labels_file = f"{stem}_labels.voxb"
            vio.write_voxb(os.path.join(config.out_dir, labels_file), labels,
                           vio.PAYLOAD_LABEL)

            states, flipped = _encode_view(depth, geo)
            states_file = f"{stem}_states.voxb"
            vio.write_voxb(os.path.join(config.out_dir, states_file), states,
                           vio.PAYLOAD_STATE)

            entry = {
                "scene": scene_files[-1], "view": vi,
                "depth": depth_file, "camera": cam_file,
                "labels": labels_file, "states": states_file,
                "report": {
                    "depth_fraction": view.report.depth_fraction,
                    "category_count": view.report.category_count,
                    "object_fraction": view.report.object_fraction,
                    "criteria": view.report.criteria,
                },
            }
            if config.encode:
                tsdf_file = f"{stem}_tsdf.voxb"
                vio.write_voxb(os.path.join(config.out_dir, tsdf_file),
                               flipped.as_grid(), vio.PAYLOAD_SCALAR,
                               mode=int(TsdfMode.FLIPPED), d_max=flipped.d_max)
                entry["tsdf"] = tsdf_file
            manifest_views.append(entry)

    if not manifest_views and int(config.scenes) > 0:
        raise ValidationError(
            "no view passed the acceptance criteria in any generated scene")

    manifest = {
        "seed": int(config.seed),
        "grid": {"dims": list(config.dims), "voxel_size": config.voxel_size},
        "d_max": config.d_max,
        "image": {"width": config.width, "height": config.height},
        "scene_params": params.to_json(),
        "scenes": scene_files,
        "views": manifest_views,
    }
    vio.write_json(os.path.join(config.out_dir, "manifest.json"), manifest)
    return manifest


def load_training_samples(manifest_path: str):
    """Read (volume, labels, states) triples referenced by a manifest.

    Volumes are normalized flipped TSDFs; each file's grid geometry must
    agree with its siblings and with the manifest.
    """
    from .model import TrainSample
    from .grid import VoxelGrid

    manifest = vio.read_json(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    dims = tuple(manifest["grid"]["dims"])
    samples = []
    for entry in manifest["views"]:
        if "tsdf" not in entry:
            raise ValidationError(
                f"manifest view {entry.get('view')} has no encoded volume; "
                "run generation with encoding enabled")
        tsdf_grid, payload, meta = vio.read_voxb(os.path.join(base, entry["tsdf"]))
        if payload != vio.PAYLOAD_SCALAR or "d_max" not in meta:
            raise ValidationError(f"{entry['tsdf']}: not a TSDF volume")
        if meta.get("mode") != int(TsdfMode.FLIPPED):
            raise ValidationError(f"{entry['tsdf']}: expected a flipped volume")
        labels, lp, _ = vio.read_voxb(os.path.join(base, entry["labels"]))
        states, sp, _ = vio.read_voxb(os.path.join(base, entry["states"]))
        if lp != vio.PAYLOAD_LABEL or sp != vio.PAYLOAD_STATE:
            raise ValidationError("label/state payload tags are wrong")
        if tuple(tsdf_grid.spec.dims) != dims:
            raise ValidationError(
                f"{entry['tsdf']}: dims {tsdf_grid.spec.dims} do not match "
                f"manifest {dims}")
        norm = VoxelGrid(tsdf_grid.spec,
                         (tsdf_grid.data / meta["d_max"]).astype(np.float32))
        samples.append(TrainSample(volume=norm, labels=labels, states=states))
    if not samples:
        raise ValidationError("manifest lists no views")
    return samples, manifest
