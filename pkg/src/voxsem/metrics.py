"""Voxel-level evaluation: completion precision/recall/IoU and semantic IoU.

Three masks restrict which voxels are scored:
  completion_occluded: occluded voxels only (the completion protocol),
  semantic_full:       surface plus occluded voxels,
  surface_only:        surface voxels.
Binary occupancy means label != 0. Per-class IoU covers classes 1..11;
classes absent from both prediction and ground truth inside the mask are
undefined and, by default, excluded from the average.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classes
from ._validation import ValidationError
from .grid import VoxelGrid
from .visibility import VoxelState

EVAL_MASKS = ("completion_occluded", "semantic_full", "surface_only")


def build_mask(states: VoxelGrid, kind: str) -> np.ndarray:
    """Boolean evaluation mask from a visibility-state grid."""
    st = states.data
    if kind == "completion_occluded":
        return st == VoxelState.OCCLUDED
    if kind == "semantic_full":
        return (st == VoxelState.SURFACE) | (st == VoxelState.OCCLUDED)
    if kind == "surface_only":
        return st == VoxelState.SURFACE
    raise ValidationError(f"unknown mask kind {kind!r}; expected one of {EVAL_MASKS}")


@dataclass
class MetricsReport:
    mask_kind: str
    voxels_scored: int
    precision: float
    recall: float
    iou: float
    class_iou: dict = field(default_factory=dict)
    class_average_iou: float | None = None
    undefined_classes: list = field(default_factory=list)
    undefined_as_zero: bool = False

    def to_json(self) -> dict:
        return {
            "mask": self.mask_kind,
            "voxels_scored": self.voxels_scored,
            "completion": {"precision": self.precision, "recall": self.recall,
                           "iou": self.iou},
            "class_iou": {classes.CLASS_NAMES[k]: v
                          for k, v in sorted(self.class_iou.items())},
            "class_average_iou": self.class_average_iou,
            "undefined_classes": [classes.CLASS_NAMES[k] for k in self.undefined_classes],
            "undefined_as_zero": self.undefined_as_zero,
        }


def _check_pair(pred: VoxelGrid, truth: VoxelGrid, states: VoxelGrid):
    if pred.spec != truth.spec or pred.spec != states.spec:
        raise ValidationError("prediction, truth, and states grids disagree")


def completion_metrics(pred: VoxelGrid, truth: VoxelGrid, states: VoxelGrid,
                       mask_kind: str = "completion_occluded"):
    """Binary occupancy precision, recall, IoU over the mask.

    Returns (precision, recall, iou, scored_count). Empty denominators
    yield 0.0 rather than an error.
    """
    _check_pair(pred, truth, states)
    mask = build_mask(states, mask_kind)
    p = (pred.data != 0) & mask
    t = (truth.data != 0) & mask
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    iou = tp / (tp + fp + fn) if tp + fp + fn else 0.0
    return precision, recall, iou, int(mask.sum())


def semantic_iou(pred: VoxelGrid, truth: VoxelGrid, states: VoxelGrid,
                 mask_kind: str = "semantic_full",
                 undefined_as_zero: bool = False) -> MetricsReport:
    """Per-class IoU for classes 1..11 plus the class average.

    A class with no predicted and no true voxels inside the mask has an
    undefined IoU; such classes are dropped from the average unless
    ``undefined_as_zero`` counts them as 0.
    """
    _check_pair(pred, truth, states)
    mask = build_mask(states, mask_kind)
    pm = pred.data[mask].astype(np.int64)
    tm = truth.data[mask].astype(np.int64)

    class_iou = {}
    undefined = []
    values = []
    for cls in range(1, classes.NUM_CLASSES):
        p = pm == cls
        t = tm == cls
        union = int((p | t).sum())
        if union == 0:
            undefined.append(cls)
            if undefined_as_zero:
                class_iou[cls] = 0.0
                values.append(0.0)
            continue
        iou = int((p & t).sum()) / union
        class_iou[cls] = iou
        values.append(iou)

    precision, recall, iou, scored = completion_metrics(pred, truth, states, mask_kind)
    return MetricsReport(
        mask_kind=mask_kind,
        voxels_scored=scored,
        precision=precision, recall=recall, iou=iou,
        class_iou=class_iou,
        class_average_iou=float(np.mean(values)) if values else None,
        undefined_classes=undefined,
        undefined_as_zero=undefined_as_zero,
    )


_TABLE_ORDER = (classes.CEILING, classes.FLOOR, classes.WALL, classes.WINDOW,
                classes.CHAIR, classes.BED, classes.SOFA, classes.TABLE,
                classes.TVS, classes.FURNITURE, classes.OBJECTS)


def report_table(report: MetricsReport) -> str:
    """Fixed-width text table: completion row plus the per-class IoU row."""
    head = ["prec", "recall", "IoU"]
    vals = [report.precision, report.recall, report.iou]
    lines = ["scored voxels: %d (mask: %s)" % (report.voxels_scored, report.mask_kind)]
    lines.append("  ".join(f"{h:>8s}" for h in head))
    lines.append("  ".join(f"{v:8.4f}" for v in vals))

    names, cells = [], []
    for cls in _TABLE_ORDER:
        names.append(classes.CLASS_NAMES[cls])
        if cls in report.class_iou:
            cells.append(f"{report.class_iou[cls]:8.4f}")
        else:
            cells.append(f"{'-':>8s}")
    names.append("avg")
    if report.class_average_iou is None:
        cells.append(f"{'-':>8s}")
    else:
        cells.append(f"{report.class_average_iou:8.4f}")
    lines.append("  ".join(f"{n:>8s}" for n in names))
    lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"
