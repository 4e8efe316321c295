"""Semantic label set shared across the pipeline.

Label 0 is empty space; labels 1..11 are the occupied categories.
"""
from __future__ import annotations

NUM_CLASSES = 12

CLASS_NAMES = (
    "empty",
    "ceiling",
    "floor",
    "wall",
    "window",
    "chair",
    "bed",
    "sofa",
    "table",
    "tvs",
    "furniture",
    "objects",
)

# Categories that count as room structure rather than content when judging
# whether a rendered view shows enough scene (empty, ceiling, floor, wall).
STRUCTURAL_CLASSES = frozenset({0, 1, 2, 3})

EMPTY = 0
CEILING = 1
FLOOR = 2
WALL = 3
WINDOW = 4
CHAIR = 5
BED = 6
SOFA = 7
TABLE = 8
TVS = 9
FURNITURE = 10
OBJECTS = 11


def class_name(label: int) -> str:
    if not 0 <= label < NUM_CLASSES:
        raise ValueError(f"label {label} outside [0, {NUM_CLASSES})")
    return CLASS_NAMES[label]
