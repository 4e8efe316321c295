"""Camera pose sampling and view acceptance.

Candidate positions form a 1 m floor grid outside furniture footprints.
Heights and tilts follow clamped Gaussians (1.5 m sd 0.1, -10 deg sd 5);
yaw is uniform. A view is kept when it sees enough valid depth in range,
enough distinct non-structural categories, and enough non-structural pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import classes
from .._validation import ValidationError
from ..camera import DepthMap, PinholeCamera, camera_at
from ..rng import stream
from .render import render_view
from .scene import Scene

HEIGHT_MEAN = 1.5
HEIGHT_STD = 0.1
TILT_MEAN_DEG = -10.0
TILT_STD_DEG = 5.0
CLAMP_SIGMA = 3.0

DEPTH_RANGE = (1.0, 8.0)
DEPTH_FRACTION_MIN = 0.70
CATEGORY_COUNT_MIN = 2          # strictly more than this many distinct categories
OBJECT_FRACTION_MIN = 0.30

_CATEGORY_RULE = ("distinct categories excluding {empty, ceiling, floor, wall} "
                  f"must exceed {CATEGORY_COUNT_MIN}")


@dataclass
class ViewReport:
    """Per-criterion acceptance report for one rendered view."""

    valid: bool
    depth_fraction: float
    category_count: int
    object_fraction: float
    criteria: dict = field(default_factory=dict)


def view_valid(depth: DepthMap, labels: np.ndarray) -> ViewReport:
    labels = np.asarray(labels)
    if labels.shape != depth.values.shape:
        raise ValidationError(
            f"label image {labels.shape} does not match depth {depth.values.shape}")
    values = depth.values
    total = values.size
    in_range = (values >= DEPTH_RANGE[0]) & (values <= DEPTH_RANGE[1])
    depth_fraction = float(in_range.sum()) / total

    non_structural = ~np.isin(labels, list(classes.STRUCTURAL_CLASSES))
    category_count = int(np.unique(labels[non_structural]).size)
    object_fraction = float(non_structural.sum()) / total

    checks = {
        "depth_in_range": {
            "value": depth_fraction,
            "threshold": DEPTH_FRACTION_MIN,
            "passed": depth_fraction > DEPTH_FRACTION_MIN,
            "rule": f"fraction of pixels with depth in {list(DEPTH_RANGE)} m "
                    f"must exceed {DEPTH_FRACTION_MIN}",
        },
        "category_count": {
            "value": category_count,
            "threshold": CATEGORY_COUNT_MIN,
            "passed": category_count > CATEGORY_COUNT_MIN,
            "rule": _CATEGORY_RULE,
        },
        "object_fraction": {
            "value": object_fraction,
            "threshold": OBJECT_FRACTION_MIN,
            "passed": object_fraction > OBJECT_FRACTION_MIN,
            "rule": "fraction of pixels with a non-structural category "
                    f"must exceed {OBJECT_FRACTION_MIN}",
        },
    }
    return ViewReport(
        valid=all(c["passed"] for c in checks.values()),
        depth_fraction=depth_fraction,
        category_count=category_count,
        object_fraction=object_fraction,
        criteria=checks,
    )


@dataclass
class ViewSample:
    camera: PinholeCamera
    depth: DepthMap
    labels: np.ndarray
    report: ViewReport


def _floor_candidates(scene: Scene, spacing: float) -> np.ndarray:
    room = scene.room
    xs = np.arange(room.lo[0] + spacing / 2, room.hi[0], spacing)
    zs = np.arange(room.lo[2] + spacing / 2, room.hi[2], spacing)
    if xs.size == 0 or zs.size == 0:
        return np.empty((0, 2))
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    pts = np.stack([gx.ravel(), gz.ravel()], axis=1)

    keep = np.ones(len(pts), dtype=bool)
    for box in scene.object_bounds():
        inside = ((pts[:, 0] >= box.lo[0]) & (pts[:, 0] <= box.hi[0])
                  & (pts[:, 1] >= box.lo[2]) & (pts[:, 1] <= box.hi[2]))
        keep &= ~inside
    return pts[keep]


def sample_cameras(scene: Scene, seed: int, max_views: int = 5,
                   width: int = 640, height: int = 480,
                   spacing: float = 1.0) -> list:
    """Sample up to ``max_views`` accepted views of a scene.

    Candidates are visited in a seeded shuffled order; each draws its own
    height, tilt, and yaw. Returns ViewSample entries for accepted views.
    """
    rng = stream(seed, "cameras")
    candidates = _floor_candidates(scene, spacing)
    if candidates.shape[0] == 0:
        return []
    order = rng.permutation(candidates.shape[0])

    views = []
    for ci in order:
        if len(views) >= max_views:
            break
        x, z = candidates[ci]
        h = float(np.clip(rng.normal(HEIGHT_MEAN, HEIGHT_STD),
                          HEIGHT_MEAN - CLAMP_SIGMA * HEIGHT_STD,
                          HEIGHT_MEAN + CLAMP_SIGMA * HEIGHT_STD))
        tilt_deg = float(np.clip(rng.normal(TILT_MEAN_DEG, TILT_STD_DEG),
                                 TILT_MEAN_DEG - CLAMP_SIGMA * TILT_STD_DEG,
                                 TILT_MEAN_DEG + CLAMP_SIGMA * TILT_STD_DEG))
        yaw = float(rng.uniform(0.0, 2 * math.pi))

        height_world = scene.room.lo[1] + h
        cam = camera_at((x, height_world, z), yaw, math.radians(tilt_deg),
                        width=width, height=height)
        depth, labels = render_view(scene, cam)
        report = view_valid(depth, labels)
        if report.valid:
            views.append(ViewSample(cam, depth, labels, report))
    return views
