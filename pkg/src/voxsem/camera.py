"""Pinhole camera model and depth maps.

The camera frame is x-right, y-down, z-forward (image convention), while
the world frame keeps +y up. ``rotation`` maps camera coordinates to world
coordinates and ``translation`` is the camera center in world meters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import ValidationError, as_float_array, check_positive, check_rotation

# Kinect-style defaults used across the pipeline.
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_FX = 518.85
DEFAULT_FY = 518.85
DEFAULT_CX = 319.5
DEFAULT_CY = 239.5


@dataclass
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.fx = check_positive(self.fx, "fx")
        self.fy = check_positive(self.fy, "fy")
        self.cx = float(self.cx)
        self.cy = float(self.cy)
        self.width = int(self.width)
        self.height = int(self.height)
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"image size must be positive, got {self.width}x{self.height}")
        self.rotation = check_rotation(self.rotation)
        self.translation = as_float_array(self.translation, "translation", shape=(3,))

    @classmethod
    def kinect(cls, rotation=None, translation=None, width: int = DEFAULT_WIDTH,
               height: int = DEFAULT_HEIGHT) -> "PinholeCamera":
        scale_x = width / DEFAULT_WIDTH
        scale_y = height / DEFAULT_HEIGHT
        return cls(
            fx=DEFAULT_FX * scale_x, fy=DEFAULT_FY * scale_y,
            cx=(DEFAULT_CX + 0.5) * scale_x - 0.5, cy=(DEFAULT_CY + 0.5) * scale_y - 0.5,
            width=width, height=height,
            rotation=np.eye(3) if rotation is None else rotation,
            translation=np.zeros(3) if translation is None else translation,
        )

    @property
    def position(self) -> np.ndarray:
        return self.translation

    @property
    def forward(self) -> np.ndarray:
        """Optical axis direction in world coordinates."""
        return self.rotation[:, 2]

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def project(self, points: np.ndarray):
        """Project world points; returns (u, v, z) with z the camera depth.

        u, v are continuous pixel coordinates; points at or behind the
        camera plane get z <= 0 and unusable u, v.
        """
        pc = self.world_to_camera(points)
        z = pc[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[..., 0] / z + self.cx
            v = self.fy * pc[..., 1] / z + self.cy
        return u, v, z

    def back_project(self, u, v, z) -> np.ndarray:
        """Pixel coordinates plus depth back to world points."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        x = (u - self.cx) / self.fx * z
        y = (v - self.cy) / self.fy * z
        cam = np.stack([x, y, z], axis=-1)
        return self.camera_to_world(cam)

    def to_json(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PinholeCamera":
        return cls(fx=obj["fx"], fy=obj["fy"], cx=obj["cx"], cy=obj["cy"],
                   width=obj["width"], height=obj["height"],
                   rotation=np.asarray(obj["rotation"], dtype=np.float64),
                   translation=np.asarray(obj["translation"], dtype=np.float64))


def camera_rotation(yaw: float, tilt: float) -> np.ndarray:
    """Rotation for a camera heading ``yaw`` radians about +y with ``tilt``
    pitch (positive looks up), rolled so the image x axis stays horizontal.

    yaw = 0 looks along +z; yaw = pi/2 looks along +x.
    """
    ct, st = math.cos(tilt), math.sin(tilt)
    cy, sy = math.cos(yaw), math.sin(yaw)
    fwd = np.array([ct * sy, st, ct * cy])
    up = np.array([0.0, 1.0, 0.0])
    if abs(ct) < 1e-9:
        raise ValidationError("tilt too close to vertical; image orientation undefined")
    # y_cam points image-down: remove the forward component from world-up, negate.
    y_cam = -(up - np.dot(up, fwd) * fwd)
    y_cam /= np.linalg.norm(y_cam)
    x_cam = np.cross(y_cam, fwd)
    r = np.stack([x_cam, y_cam, fwd], axis=1)
    return check_rotation(r)


def camera_at(position, yaw: float, tilt: float, width: int = DEFAULT_WIDTH,
              height: int = DEFAULT_HEIGHT) -> PinholeCamera:
    return PinholeCamera.kinect(rotation=camera_rotation(yaw, tilt),
                                translation=np.asarray(position, dtype=np.float64),
                                width=width, height=height)


@dataclass
class DepthMap:
    """Per-pixel metric depth along the optical axis; 0 marks invalid pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError(f"depth map must be 2D, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("depth values must be finite and >= 0")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0

    def points(self, camera: PinholeCamera) -> np.ndarray:
        """World points of all valid pixels, shape (n, 3)."""
        if (self.height, self.width) != (camera.height, camera.width):
            raise ValidationError(
                f"depth {self.values.shape} does not match camera "
                f"{(camera.height, camera.width)}")
        vv, uu = np.nonzero(self.valid)
        return camera.back_project(uu, vv, self.values[vv, uu])
