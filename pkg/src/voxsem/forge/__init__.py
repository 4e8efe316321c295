"""Synthetic scene generation: meshes, rooms, rendering, camera sampling."""
from .mesh import SimilarityTransform, TriMesh
from .scene import Scene, SceneObject, SceneParams, WindowRect, generate_scene
from .voxelize import ObjectVoxelization, voxelize_object
from .labels import compose_scene_labels
from .render import render_view
from .cameras import sample_cameras, view_valid, ViewReport

__all__ = [
    "SimilarityTransform", "TriMesh",
    "Scene", "SceneObject", "SceneParams", "WindowRect", "generate_scene",
    "ObjectVoxelization", "voxelize_object",
    "compose_scene_labels", "render_view",
    "sample_cameras", "view_valid", "ViewReport",
]
