"""Voxel grid geometry: axis-aligned boxes, grid specs, and dense grids.

World coordinates are meters with +y up. A grid is anchored at ``origin``
(the minimum corner of voxel (0, 0, 0)) and stores data in arrays indexed
``[ix, iy, iz]``, so the x index varies fastest in Fortran order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError, as_float_array, check_dims, check_positive


@dataclass
class Box:
    """Axis-aligned box in world meters, closed at the min corner."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = as_float_array(self.lo, "lo", shape=(3,))
        self.hi = as_float_array(self.hi, "hi", shape=(3,))
        if not np.all(self.hi > self.lo):
            raise ValidationError(f"box has non-positive extent: lo={self.lo}, hi={self.hi}")

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership test, vectorized over (..., 3) points."""
        p = np.asarray(points, dtype=np.float64)
        return np.all((p >= self.lo) & (p < self.hi), axis=-1)

    def overlaps(self, other: "Box") -> bool:
        """Strict interior overlap; shared faces do not count."""
        return bool(np.all(self.hi > other.lo) and np.all(other.hi > self.lo))

    def expanded(self, margin: float) -> "Box":
        return Box(self.lo - margin, self.hi + margin)

    def to_json(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Box":
        return cls(obj["min"], obj["max"])


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a dense voxel grid: origin corner, cell size, dimensions."""

    origin: tuple
    voxel_size: float
    dims: tuple

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        if len(origin) != 3 or not all(np.isfinite(origin)):
            raise ValidationError(f"origin: need three finite floats, got {self.origin}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "voxel_size", check_positive(self.voxel_size, "voxel_size"))
        object.__setattr__(self, "dims", check_dims(self.dims))

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    def bounds(self) -> Box:
        lo = np.asarray(self.origin, dtype=np.float64)
        return Box(lo, lo + self.extent)

    def voxel_centers(self) -> np.ndarray:
        """Centers of every voxel, shape (nx, ny, nz, 3)."""
        nx, ny, nz = self.dims
        ax = self.origin[0] + (np.arange(nx) + 0.5) * self.voxel_size
        ay = self.origin[1] + (np.arange(ny) + 0.5) * self.voxel_size
        az = self.origin[2] + (np.arange(nz) + 0.5) * self.voxel_size
        out = np.empty((nx, ny, nz, 3), dtype=np.float64)
        out[..., 0] = ax[:, None, None]
        out[..., 1] = ay[None, :, None]
        out[..., 2] = az[None, None, :]
        return out

    def downsampled(self, factor: int) -> "GridSpec":
        """Spec covering the same volume with cells ``factor`` times larger."""
        factor = int(factor)
        if factor < 1:
            raise ValidationError(f"factor must be >= 1, got {factor}")
        nx, ny, nz = self.dims
        if nx % factor or ny % factor or nz % factor:
            raise ValidationError(f"dims {self.dims} not divisible by {factor}")
        return GridSpec(self.origin, self.voxel_size * factor,
                        (nx // factor, ny // factor, nz // factor))

    def to_json(self) -> dict:
        return {"origin": list(self.origin), "voxel_size": self.voxel_size,
                "dims": list(self.dims)}

    @classmethod
    def from_json(cls, obj: dict) -> "GridSpec":
        return cls(tuple(obj["origin"]), obj["voxel_size"], tuple(obj["dims"]))


def world_to_grid(points: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Map world points to integer voxel indices (floor rule).

    Points on a voxel's min face belong to that voxel. Output may lie
    outside [0, dims); callers decide how to treat out-of-range indices.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1] != 3:
        raise ValidationError(f"points: last axis must be 3, got shape {p.shape}")
    rel = (p - np.asarray(spec.origin)) / spec.voxel_size
    return np.floor(rel).astype(np.int64)


def grid_to_world(indices: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Map integer voxel indices to the world coordinates of voxel centers.

    Indices outside [0, dims) are rejected.
    """
    idx = np.asarray(indices)
    if idx.shape[-1] != 3:
        raise ValidationError(f"indices: last axis must be 3, got shape {idx.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValidationError(f"indices: expected integers, got dtype {idx.dtype}")
    dims = np.asarray(spec.dims)
    if np.any(idx < 0) or np.any(idx >= dims):
        bad = idx[np.any((idx < 0) | (idx >= dims), axis=-1)]
        raise ValidationError(f"indices outside grid dims {spec.dims}: {bad[:4].tolist()}")
    return np.asarray(spec.origin) + (idx + 0.5) * spec.voxel_size


_ALLOWED_DTYPES = {np.dtype(np.float32), np.dtype(np.uint8)}


@dataclass
class VoxelGrid:
    """Dense grid of per-voxel values over a GridSpec.

    ``data`` is indexed [ix, iy, iz]; dtype is float32 for scalar fields
    and uint8 for label or state fields.
    """

    spec: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.dtype not in _ALLOWED_DTYPES:
            raise ValidationError(f"grid dtype must be float32 or uint8, got {self.data.dtype}")
        if self.data.shape != tuple(self.spec.dims):
            raise ValidationError(
                f"data shape {self.data.shape} does not match spec dims {self.spec.dims}")

    @classmethod
    def zeros(cls, spec: GridSpec, dtype=np.float32) -> "VoxelGrid":
        return cls(spec, np.zeros(spec.dims, dtype=dtype))

    @classmethod
    def full(cls, spec: GridSpec, value, dtype=np.float32) -> "VoxelGrid":
        return cls(spec, np.full(spec.dims, value, dtype=dtype))
