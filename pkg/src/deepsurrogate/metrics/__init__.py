"""Exact evaluation metrics: edit distance and rotated-box IoU."""

from .boxes import RotatedBox, area, box_to_polygon, clip, iou_arrays, mc_iou, rotated_iou
from .edit import edit_distance, normalized_similarity

__all__ = [
    "RotatedBox",
    "area",
    "box_to_polygon",
    "clip",
    "iou_arrays",
    "mc_iou",
    "rotated_iou",
    "edit_distance",
    "normalized_similarity",
]
