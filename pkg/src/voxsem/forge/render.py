"""Single-view rendering of a scene: z-buffered depth plus category image.

Triangles are clipped against a near plane in camera space, projected, and
rasterized with perspective-correct depth (1/z interpolates linearly in
screen space). No backface culling: the camera sits inside the room shell.
"""
from __future__ import annotations

import numpy as np

from .. import classes
from ..camera import DepthMap, PinholeCamera
from .scene import Scene

Z_NEAR = 0.05
# Window panels sit this far inside the wall plane so they win the z-buffer.
WINDOW_INSET = 0.012


def _rect(p00, p10, p11, p01) -> np.ndarray:
    """Two triangles covering a quad, as a (2, 3, 3) array."""
    p00, p10, p11, p01 = (np.asarray(p, dtype=np.float64) for p in (p00, p10, p11, p01))
    return np.stack([np.stack([p00, p10, p11]), np.stack([p00, p11, p01])])


def scene_triangles(scene: Scene):
    """World-space triangle soup with per-triangle categories."""
    lo, hi = scene.room.lo, scene.room.hi
    tris, cats = [], []

    def add(quads, cat):
        for q in quads:
            tris.append(q)
            cats.extend([cat] * len(q))

    add([_rect((lo[0], lo[1], lo[2]), (hi[0], lo[1], lo[2]),
               (hi[0], lo[1], hi[2]), (lo[0], lo[1], hi[2]))], classes.FLOOR)
    add([_rect((lo[0], hi[1], lo[2]), (hi[0], hi[1], lo[2]),
               (hi[0], hi[1], hi[2]), (lo[0], hi[1], hi[2]))], classes.CEILING)
    walls = [
        _rect((lo[0], lo[1], lo[2]), (lo[0], lo[1], hi[2]),
              (lo[0], hi[1], hi[2]), (lo[0], hi[1], lo[2])),
        _rect((hi[0], lo[1], lo[2]), (hi[0], lo[1], hi[2]),
              (hi[0], hi[1], hi[2]), (hi[0], hi[1], lo[2])),
        _rect((lo[0], lo[1], lo[2]), (hi[0], lo[1], lo[2]),
              (hi[0], hi[1], lo[2]), (lo[0], hi[1], lo[2])),
        _rect((lo[0], lo[1], hi[2]), (hi[0], lo[1], hi[2]),
              (hi[0], hi[1], hi[2]), (lo[0], hi[1], hi[2])),
    ]
    add(walls, classes.WALL)

    for w in scene.windows:
        if w.wall == "x_min":
            x = lo[0] + WINDOW_INSET
            quad = _rect((x, w.y0, w.a0), (x, w.y0, w.a1), (x, w.y1, w.a1), (x, w.y1, w.a0))
        elif w.wall == "x_max":
            x = hi[0] - WINDOW_INSET
            quad = _rect((x, w.y0, w.a0), (x, w.y0, w.a1), (x, w.y1, w.a1), (x, w.y1, w.a0))
        elif w.wall == "z_min":
            z = lo[2] + WINDOW_INSET
            quad = _rect((w.a0, w.y0, z), (w.a1, w.y0, z), (w.a1, w.y1, z), (w.a0, w.y1, z))
        else:
            z = hi[2] - WINDOW_INSET
            quad = _rect((w.a0, w.y0, z), (w.a1, w.y0, z), (w.a1, w.y1, z), (w.a0, w.y1, z))
        add([quad], classes.WINDOW)

    for obj in scene.objects:
        mesh = scene.meshes[obj.mesh_id]
        verts = obj.transform.apply(mesh.vertices)
        for tri in verts[mesh.triangles]:
            tris.append(tri[None])
            cats.append(obj.category)

    return np.concatenate(tris, axis=0), np.asarray(cats, dtype=np.uint8)


def _clip_near(tri: np.ndarray, z_near: float):
    """Clip one camera-space triangle to z >= z_near; yields 0..2 triangles."""
    inside = tri[:, 2] >= z_near
    if inside.all():
        yield tri
        return
    if not inside.any():
        return
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        a_in, b_in = inside[i], inside[(i + 1) % 3]
        if a_in:
            poly.append(a)
        if a_in != b_in:
            t = (z_near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    for k in range(1, len(poly) - 1):
        yield np.stack([poly[0], poly[k], poly[k + 1]])


def render_view(scene: Scene, camera: PinholeCamera, z_near: float = Z_NEAR):
    """Render depth (meters, 0 where nothing is hit) and a category image."""
    tris_world, cats = scene_triangles(scene)
    n = tris_world.shape[0]
    tris_cam = camera.world_to_camera(tris_world.reshape(-1, 3)).reshape(n, 3, 3)

    zbuf = np.full((camera.height, camera.width), np.inf)
    labels = np.zeros((camera.height, camera.width), dtype=np.uint8)

    for i in range(n):
        for tri in _clip_near(tris_cam[i], z_near):
            z = tri[:, 2]
            u = camera.fx * tri[:, 0] / z + camera.cx
            v = camera.fy * tri[:, 1] / z + camera.cy

            u_lo = max(int(np.floor(u.min())), 0)
            u_hi = min(int(np.ceil(u.max())), camera.width - 1)
            v_lo = max(int(np.floor(v.min())), 0)
            v_hi = min(int(np.ceil(v.max())), camera.height - 1)
            if u_lo > u_hi or v_lo > v_hi:
                continue

            area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0])
            if abs(area) < 1e-12:
                continue

            px, py = np.meshgrid(np.arange(u_lo, u_hi + 1), np.arange(v_lo, v_hi + 1))
            w0 = (u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)
            w1 = (u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)
            w2 = (u[0] - px) * (v[1] - py) - (u[1] - px) * (v[0] - py)
            b0, b1, b2 = w0 / area, w1 / area, w2 / area
            inside = (b0 >= 0) & (b1 >= 0) & (b2 >= 0)
            if not inside.any():
                continue

            inv_z = b0 / z[0] + b1 / z[1] + b2 / z[2]
            with np.errstate(divide="ignore"):
                z_pix = 1.0 / inv_z
            patch = zbuf[v_lo:v_hi + 1, u_lo:u_hi + 1]
            win = inside & (inv_z > 0) & (z_pix < patch)
            patch[win] = z_pix[win]
            labels[v_lo:v_hi + 1, u_lo:u_hi + 1][win] = cats[i]

    depth = np.where(np.isfinite(zbuf), zbuf, 0.0)
    return DepthMap(depth), labels
