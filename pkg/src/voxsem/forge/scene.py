"""Procedural room synthesis.

A scene is an axis-aligned room shell (floor, ceiling, four walls, optional
window rectangles cut into walls) plus upright furniture proxies placed by
rejection sampling so their bounding boxes stay inside the room and never
interpenetrate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import classes
from .._validation import ValidationError
from ..grid import Box
from ..rng import stream
from .mesh import SimilarityTransform, TriMesh, box_mesh, transformed_bounds

WALL_NAMES = ("x_min", "x_max", "z_min", "z_max")


@dataclass
class WindowRect:
    """Rectangle cut into one wall: horizontal span along the wall, vertical span."""

    wall: str
    a0: float
    a1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.wall not in WALL_NAMES:
            raise ValidationError(f"wall must be one of {WALL_NAMES}, got {self.wall!r}")
        if not (self.a1 > self.a0 and self.y1 > self.y0):
            raise ValidationError("window spans must be increasing")

    def to_json(self) -> dict:
        return {"wall": self.wall, "a0": self.a0, "a1": self.a1,
                "y0": self.y0, "y1": self.y1}

    @classmethod
    def from_json(cls, obj: dict) -> "WindowRect":
        return cls(obj["wall"], obj["a0"], obj["a1"], obj["y0"], obj["y1"])


@dataclass
class SceneObject:
    """One placed instance: a library mesh, its category, and its pose."""

    mesh_id: str
    category: int
    transform: SimilarityTransform

    def __post_init__(self):
        self.category = int(self.category)
        if not 0 < self.category < classes.NUM_CLASSES:
            raise ValidationError(f"category {self.category} outside 1..{classes.NUM_CLASSES - 1}")

    def to_json(self) -> dict:
        return {"mesh_id": self.mesh_id, "category": self.category,
                "transform": self.transform.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "SceneObject":
        return cls(obj["mesh_id"], obj["category"],
                   SimilarityTransform.from_json(obj["transform"]))


@dataclass
class Scene:
    room: Box
    windows: list
    objects: list
    meshes: dict
    seed: int | None = None

    def __post_init__(self):
        for obj in self.objects:
            if obj.mesh_id not in self.meshes:
                raise ValidationError(f"object references unknown mesh {obj.mesh_id!r}")
            lo, hi = transformed_bounds(self.meshes[obj.mesh_id], obj.transform)
            slack = 1e-6
            if np.any(lo < self.room.lo - slack) or np.any(hi > self.room.hi + slack):
                raise ValidationError(f"object {obj.mesh_id!r} extends outside the room")
        for i, a in enumerate(self.objects):
            box_a = Box(*transformed_bounds(self.meshes[a.mesh_id], a.transform))
            for b in self.objects[i + 1:]:
                box_b = Box(*transformed_bounds(self.meshes[b.mesh_id], b.transform))
                if box_a.overlaps(box_b):
                    raise ValidationError(
                        f"objects {a.mesh_id!r} and {b.mesh_id!r} overlap")

    def object_bounds(self) -> list:
        return [Box(*transformed_bounds(self.meshes[o.mesh_id], o.transform))
                for o in self.objects]

    def to_json(self) -> dict:
        return {
            "room": self.room.to_json(),
            "windows": [w.to_json() for w in self.windows],
            "objects": [o.to_json() for o in self.objects],
            "meshes": {k: m.to_json() for k, m in sorted(self.meshes.items())},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Scene":
        return cls(
            room=Box.from_json(obj["room"]),
            windows=[WindowRect.from_json(w) for w in obj["windows"]],
            objects=[SceneObject.from_json(o) for o in obj["objects"]],
            meshes={k: TriMesh.from_json(m) for k, m in obj["meshes"].items()},
            seed=obj.get("seed"),
        )


def _chair() -> TriMesh:
    leg = 0.05
    parts = [box_mesh((0.45, 0.08, 0.45), center=(0, 0.41, 0))]
    for dx in (-0.18, 0.18):
        for dz in (-0.18, 0.18):
            parts.append(box_mesh((leg, 0.37, leg), center=(dx, 0.185, dz)))
    parts.append(box_mesh((0.45, 0.50, 0.06), center=(0, 0.70, -0.195)))
    return TriMesh.merge(parts)


def _table() -> TriMesh:
    leg = 0.06
    parts = [box_mesh((1.20, 0.06, 0.70), center=(0, 0.73, 0))]
    for dx in (-0.54, 0.54):
        for dz in (-0.29, 0.29):
            parts.append(box_mesh((leg, 0.70, leg), center=(dx, 0.35, dz)))
    return TriMesh.merge(parts)


def _sofa() -> TriMesh:
    parts = [
        box_mesh((1.80, 0.42, 0.85), center=(0, 0.21, 0)),
        box_mesh((1.80, 0.48, 0.22), center=(0, 0.66, -0.315)),
        box_mesh((0.22, 0.22, 0.85), center=(-0.79, 0.53, 0)),
        box_mesh((0.22, 0.22, 0.85), center=(0.79, 0.53, 0)),
    ]
    return TriMesh.merge(parts)


_PROXY_BUILDERS = {
    "bed": lambda: box_mesh((1.55, 0.55, 2.05)),
    "sofa": _sofa,
    "table": _table,
    "chair": _chair,
    "wardrobe": lambda: box_mesh((1.05, 1.85, 0.58)),
    "sideboard": lambda: box_mesh((1.30, 0.72, 0.45)),
    "tv_panel": lambda: box_mesh((0.95, 0.58, 0.09)),
    "object_box": lambda: box_mesh((0.32, 0.38, 0.27)),
}

_MESH_CATEGORY = {
    "bed": classes.BED,
    "sofa": classes.SOFA,
    "table": classes.TABLE,
    "chair": classes.CHAIR,
    "wardrobe": classes.FURNITURE,
    "sideboard": classes.FURNITURE,
    "tv_panel": classes.TVS,
    "object_box": classes.OBJECTS,
}


def proxy_mesh_library() -> dict:
    return {name: build() for name, build in _PROXY_BUILDERS.items()}


@dataclass
class SceneParams:
    """Room-size ranges and per-category instance counts."""

    room_x: tuple = (4.2, 6.0)
    room_y: tuple = (2.5, 3.0)
    room_z: tuple = (4.2, 6.0)
    counts: dict = field(default_factory=lambda: {
        "bed": 1, "sofa": 1, "table": 1, "chair": 2,
        "tv": 1, "furniture": 1, "objects": 2, "window": 2,
    })
    scale_range: tuple = (0.88, 1.12)
    wall_margin: float = 0.06
    max_attempts: int = 120

    def __post_init__(self):
        for name, rng_ in (("room_x", self.room_x), ("room_y", self.room_y),
                           ("room_z", self.room_z), ("scale_range", self.scale_range)):
            lo, hi = float(rng_[0]), float(rng_[1])
            if not (0 < lo <= hi):
                raise ValidationError(f"{name}: bad range {rng_}")
        for key, n in self.counts.items():
            if key not in ("bed", "sofa", "table", "chair", "tv",
                           "furniture", "objects", "window"):
                raise ValidationError(f"unknown placement category {key!r}")
            if int(n) < 0:
                raise ValidationError(f"count for {key!r} must be >= 0")

    def to_json(self) -> dict:
        return {"room_x": list(self.room_x), "room_y": list(self.room_y),
                "room_z": list(self.room_z), "counts": dict(self.counts),
                "scale_range": list(self.scale_range),
                "wall_margin": self.wall_margin, "max_attempts": self.max_attempts}

    @classmethod
    def from_json(cls, obj: dict) -> "SceneParams":
        return cls(tuple(obj["room_x"]), tuple(obj["room_y"]), tuple(obj["room_z"]),
                   dict(obj["counts"]), tuple(obj["scale_range"]),
                   obj["wall_margin"], obj["max_attempts"])


_AXIS_ALIGNED_YAWS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
# Large furniture keeps axis-aligned yaws; small items may face anywhere.
_FREE_YAW_MESHES = {"chair", "object_box"}


def _sample_windows(rng, room: Box, count: int) -> list:
    windows = []
    for _ in range(count):
        for _attempt in range(40):
            wall = WALL_NAMES[rng.integers(len(WALL_NAMES))]
            axis = 0 if wall in ("z_min", "z_max") else 2
            lo, hi = room.lo[axis], room.hi[axis]
            width = rng.uniform(0.9, 1.6)
            if hi - lo < width + 0.6:
                continue
            a0 = rng.uniform(lo + 0.3, hi - 0.3 - width)
            y0 = rng.uniform(0.85, 1.1)
            y1 = min(y0 + rng.uniform(0.9, 1.3), room.hi[1] - 0.25)
            if y1 - y0 < 0.5:
                continue
            cand = WindowRect(wall, a0, a0 + width, y0, y1)
            clash = any(w.wall == cand.wall and w.a1 > cand.a0 and cand.a1 > w.a0
                        for w in windows)
            if not clash:
                windows.append(cand)
                break
    return windows


def _try_place(rng, mesh: TriMesh, room: Box, placed: list, params: SceneParams,
               yaw_choices, base_y: float = 0.0):
    """Rejection-sample a non-overlapping pose; None when attempts run out."""
    lo_s, hi_s = params.scale_range
    for _ in range(params.max_attempts):
        scale = rng.uniform(lo_s, hi_s, size=3)
        if yaw_choices is None:
            yaw = rng.uniform(0.0, 2 * math.pi)
        else:
            yaw = yaw_choices[rng.integers(len(yaw_choices))]
        probe = SimilarityTransform(yaw, scale, (0.0, base_y, 0.0))
        b_lo, b_hi = transformed_bounds(mesh, probe)
        size = b_hi - b_lo
        m = params.wall_margin
        span_x = room.size[0] - size[0] - 2 * m
        span_z = room.size[2] - size[2] - 2 * m
        if span_x <= 0 or span_z <= 0 or b_hi[1] - b_lo[1] >= room.size[1]:
            continue
        tx = room.lo[0] + m - b_lo[0] + rng.uniform(0.0, span_x)
        tz = room.lo[2] + m - b_lo[2] + rng.uniform(0.0, span_z)
        tf = SimilarityTransform(yaw, scale, (tx, base_y + room.lo[1], tz))
        box = Box(*transformed_bounds(mesh, tf))
        if any(box.overlaps(p) for p in placed):
            continue
        return tf, box
    return None


def generate_scene(params: SceneParams, seed: int) -> Scene:
    """Deterministically synthesize one labeled room."""
    rng = stream(seed, "scene")
    sx = rng.uniform(*params.room_x)
    sy = rng.uniform(*params.room_y)
    sz = rng.uniform(*params.room_z)
    room = Box((0.0, 0.0, 0.0), (sx, sy, sz))

    windows = _sample_windows(rng, room, int(params.counts.get("window", 0)))
    meshes = proxy_mesh_library()

    # Fixed placement order, big furniture first so small items fill gaps.
    order = []
    order += ["bed"] * int(params.counts.get("bed", 0))
    order += ["sofa"] * int(params.counts.get("sofa", 0))
    order += ["wardrobe"] * int(params.counts.get("furniture", 0))
    order += ["table"] * int(params.counts.get("table", 0))
    order += ["tv"] * int(params.counts.get("tv", 0))
    order += ["chair"] * int(params.counts.get("chair", 0))
    order += ["object_box"] * int(params.counts.get("objects", 0))

    objects, placed = [], []
    for kind in order:
        if kind == "tv":
            # A television is a thin panel standing on a sideboard.
            res = _try_place(rng, meshes["sideboard"], room, placed, params,
                             _AXIS_ALIGNED_YAWS)
            if res is None:
                raise ValidationError(
                    f"could not place category 'tv' after {params.max_attempts} attempts")
            tf, box = res
            objects.append(SceneObject("sideboard", _MESH_CATEGORY["sideboard"], tf))
            placed.append(box)
            top = box.hi[1]
            panel_tf = SimilarityTransform(
                tf.yaw, tf.scale * np.array([0.85, 1.0, 1.0]),
                (tf.translation[0], top, tf.translation[2]))
            p_lo, p_hi = transformed_bounds(meshes["tv_panel"], panel_tf)
            if np.all(p_lo >= room.lo) and np.all(p_hi <= room.hi):
                objects.append(SceneObject("tv_panel", _MESH_CATEGORY["tv_panel"], panel_tf))
                placed.append(Box(p_lo, p_hi))
            continue
        mesh = meshes[kind]
        yaws = None if kind in _FREE_YAW_MESHES else _AXIS_ALIGNED_YAWS
        res = _try_place(rng, mesh, room, placed, params, yaws)
        if res is None:
            raise ValidationError(
                f"could not place category {kind!r} after {params.max_attempts} attempts")
        tf, box = res
        objects.append(SceneObject(kind, _MESH_CATEGORY[kind], tf))
        placed.append(box)

    used = {o.mesh_id for o in objects}
    return Scene(room=room, windows=windows, objects=objects,
                 meshes={k: v for k, v in meshes.items() if k in used}, seed=seed)
