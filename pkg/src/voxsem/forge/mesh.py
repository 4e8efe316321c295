"""Triangle meshes and the instance transforms that place them in rooms."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .._validation import ValidationError, as_float_array


@dataclass
class TriMesh:
    """Indexed triangle mesh. Vertices are meters in the mesh's own frame."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError(f"vertices must be (n, 3), got {self.vertices.shape}")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValidationError(f"triangles must be (m, 3), got {self.triangles.shape}")
        if not np.all(np.isfinite(self.vertices)):
            raise ValidationError("vertices contain non-finite values")
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ValidationError("triangle indices out of range")
            if np.any(self.areas() <= 0):
                raise ValidationError("mesh contains degenerate triangles")
        else:
            raise ValidationError("mesh has no triangles")

    def corners(self) -> np.ndarray:
        """Triangle corner positions, shape (m, 3, 3)."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        c = self.vertices[self.triangles]
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist(), "triangles": self.triangles.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "TriMesh":
        return cls(np.asarray(obj["vertices"], dtype=np.float64),
                   np.asarray(obj["triangles"], dtype=np.int32))

    @classmethod
    def merge(cls, meshes) -> "TriMesh":
        verts, tris, base = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + base)
            base += len(m.vertices)
        return cls(np.vstack(verts), np.vstack(tris))


_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # bottom (y-)
    [4, 5, 6], [4, 6, 7],  # top (y+)
    [0, 1, 5], [0, 5, 4],  # z-
    [2, 3, 7], [2, 7, 6],  # z+
    [0, 4, 7], [0, 7, 3],  # x-
    [1, 2, 6], [1, 6, 5],  # x+
], dtype=np.int32)


def box_mesh(size, center=None) -> TriMesh:
    """Axis-aligned box. By default centered in x/z with its base at y = 0."""
    sx, sy, sz = (float(v) for v in size)
    if center is None:
        center = (0.0, sy / 2, 0.0)
    c = as_float_array(center, "center", shape=(3,))
    half = np.array([sx, sy, sz]) / 2
    corners = np.array([
        [-1, -1, -1], [1, -1, -1], [1, -1, 1], [-1, -1, 1],
        [-1, 1, -1], [1, 1, -1], [1, 1, 1], [-1, 1, 1],
    ], dtype=np.float64)
    return TriMesh(c + corners * half, _BOX_FACES.copy())


@dataclass
class SimilarityTransform:
    """Yaw about +y, per-axis scale, then translation. Objects stay upright."""

    yaw: float = 0.0
    scale: np.ndarray = field(default_factory=lambda: np.ones(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.yaw = float(self.yaw)
        self.scale = as_float_array(self.scale, "scale", shape=(3,))
        if np.any(self.scale <= 0):
            raise ValidationError(f"scale must be positive, got {self.scale}")
        self.translation = as_float_array(self.translation, "translation", shape=(3,))

    @property
    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p * self.scale) @ self.rotation.T + self.translation

    def invert(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return ((p - self.translation) @ self.rotation) / self.scale

    def to_json(self) -> dict:
        return {"yaw": self.yaw, "scale": self.scale.tolist(),
                "translation": self.translation.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "SimilarityTransform":
        return cls(obj["yaw"], np.asarray(obj["scale"]), np.asarray(obj["translation"]))


def transformed_bounds(mesh: TriMesh, transform: SimilarityTransform):
    """World AABB of a transformed mesh (over transformed vertices)."""
    pts = transform.apply(mesh.vertices)
    return pts.min(axis=0), pts.max(axis=0)
