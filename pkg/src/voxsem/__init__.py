"""Semantic scene completion from single depth views, at desk scale.

The pipeline: synthesize labeled rooms, render depth, encode flipped TSDF
volumes, train a dilated 3D convnet that predicts per-voxel occupancy and
class at quarter resolution, and score predictions with voxel IoU.
"""
from .classes import CLASS_NAMES, NUM_CLASSES
from .grid import Box, GridSpec, VoxelGrid, grid_to_world, world_to_grid
from .camera import DepthMap, PinholeCamera, camera_at
from .visibility import VoxelState, classify_voxels
from .tsdf import TsdfGrid, TsdfMode, accurate_tsdf, flip_tsdf, normalize_tsdf, projective_tsdf
from .model import (Completion, TrainConfig, TrainSample, balance_sample,
                    build_sscnet, downsample_labels, infer, train)
from .metrics import MetricsReport, build_mask, completion_metrics, semantic_iou
from .estimators import SceneCompleter, TsdfEncoder

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES", "NUM_CLASSES",
    "Box", "GridSpec", "VoxelGrid", "grid_to_world", "world_to_grid",
    "DepthMap", "PinholeCamera", "camera_at",
    "VoxelState", "classify_voxels",
    "TsdfGrid", "TsdfMode", "accurate_tsdf", "flip_tsdf", "normalize_tsdf",
    "projective_tsdf",
    "Completion", "TrainConfig", "TrainSample", "balance_sample",
    "build_sscnet", "downsample_labels", "infer", "train",
    "MetricsReport", "build_mask", "completion_metrics", "semantic_iou",
    "SceneCompleter", "TsdfEncoder",
    "__version__",
]
