"""Rotated rectangles: polygon conversion, convex clipping, exact and Monte-Carlo IoU."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np

Point = tuple[float, float]
Polygon = list[Point]

CLIP_EPS = 1e-12
ANGLE_TOL = 1e-6


@dataclass(frozen=True)
class RotatedBox:
    """Rectangle with normalised centre/size and its angle stored as a (cos, sin) pair."""

    cx: float
    cy: float
    w: float
    h: float
    cos_t: float
    sin_t: float

    @classmethod
    def from_angle(cls, cx, cy, w, h, theta: float) -> RotatedBox:
        return cls(cx, cy, w, h, math.cos(theta), math.sin(theta))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> RotatedBox:
        if len(values) != 6:
            raise ValueError(f"a rotated box needs 6 parameters, got {len(values)}")
        return cls(*(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @property
    def angle(self) -> float:
        return math.atan2(self.sin_t, self.cos_t)

    def is_valid(self) -> bool:
        return self.w > 0 and self.h > 0 and abs(self.cos_t**2 + self.sin_t**2 - 1.0) <= ANGLE_TOL


def box_to_polygon(box: RotatedBox, image_size: tuple[float, float] = (1.0, 1.0)) -> Polygon:
    """Corners of ``box`` in pixel coordinates, counter-clockwise."""
    norm = box.cos_t**2 + box.sin_t**2
    if abs(norm - 1.0) > ANGLE_TOL:
        raise ValueError(f"(cos, sin) pair is not unit length: cos^2+sin^2 = {norm!r}")
    W, H = image_size
    cx, cy = box.cx * W, box.cy * H
    hw, hh = 0.5 * box.w * W, 0.5 * box.h * H
    c, s = box.cos_t, box.sin_t
    corners = ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))
    return [(cx + c * x - s * y, cy + s * x + c * y) for x, y in corners]


def area(poly: Polygon) -> float:
    """Shoelace area; 0 for fewer than three vertices."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) * 0.5


def _dedupe(poly: Polygon) -> Polygon:
    out: Polygon = []
    for p in poly:
        if not out or abs(p[0] - out[-1][0]) > CLIP_EPS or abs(p[1] - out[-1][1]) > CLIP_EPS:
            out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= CLIP_EPS and abs(out[0][1] - out[-1][1]) <= CLIP_EPS:
        out.pop()
    return out


def clip(subject: Polygon, clipper: Polygon) -> Polygon:
    """Sutherland-Hodgman intersection of two convex CCW polygons ([] when empty)."""
    out = list(subject)
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        src = out
        out = []
        m = len(src)
        for j in range(m):
            px, py = src[j - 1]
            qx, qy = src[j]
            dp = ex * (py - ay) - ey * (px - ax)
            dq = ex * (qy - ay) - ey * (qx - ax)
            p_in = dp >= -CLIP_EPS
            q_in = dq >= -CLIP_EPS
            if q_in:
                if not p_in:
                    t = dp / (dp - dq)
                    out.append((px + t * (qx - px), py + t * (qy - py)))
                out.append((qx, qy))
            elif p_in:
                t = dp / (dp - dq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        out = _dedupe(out)
    return out if len(out) >= 3 else []


def rotated_iou(
    a: RotatedBox,
    b: RotatedBox,
    image_size: tuple[float, float] = (1.0, 1.0),
    with_flag: bool = False,
):
    """Exact intersection-over-union of two rotated boxes.

    Zero-area boxes give 0. With ``with_flag`` returns ``(iou, degenerate)``.
    """
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        return (0.0, True) if with_flag else 0.0
    if a == b:
        return (1.0, False) if with_flag else 1.0
    pa = box_to_polygon(a, image_size)
    pb = box_to_polygon(b, image_size)
    area_a, area_b = area(pa), area(pb)
    if area_a <= 0.0 or area_b <= 0.0:
        return (0.0, True) if with_flag else 0.0
    inter = area(clip(pa, pb))
    union = area_a + area_b - inter
    iou = min(1.0, max(0.0, inter / union))
    return (iou, False) if with_flag else iou


def iou_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise IoU for two (n, 6) arrays of box parameters."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 6)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 6)
    return np.array([rotated_iou(RotatedBox(*ra), RotatedBox(*rb)) for ra, rb in zip(a.tolist(), b.tolist())])


def _inside(poly: Polygon, pts: np.ndarray) -> np.ndarray:
    mask = np.ones(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        mask &= (bx - ax) * (pts[:, 1] - ay) - (by - ay) * (pts[:, 0] - ax) >= 0.0
    return mask


def mc_iou(
    a: RotatedBox,
    b: RotatedBox,
    n_samples: int = 1_000_000,
    seed: int = 0,
    image_size: tuple[float, float] = (1.0, 1.0),
    stratified: bool = True,
) -> float:
    """Monte-Carlo IoU from points drawn uniformly over the bounding box of both boxes.

    With ``stratified`` the bounding box is cut into a k-by-k grid (k = isqrt(n))
    and one uniform point is drawn per cell (jittered sampling); leftover samples
    are i.i.d. uniform. Every point is still uniform over the bounding box, the
    variance is just much lower than plain i.i.d. sampling.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        return 0.0
    pa = box_to_polygon(a, image_size)
    pb = box_to_polygon(b, image_size)
    allpts = np.array(pa + pb)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    rng = np.random.default_rng(seed)
    k = math.isqrt(n_samples) if stratified else 0
    both = either = 0

    def tally(pts):
        nonlocal both, either
        ia = _inside(pa, pts)
        ib = _inside(pb, pts)
        both += int(np.count_nonzero(ia & ib))
        either += int(np.count_nonzero(ia | ib))

    if k:
        cols = np.arange(k)
        rows_per_chunk = max(1, 250_000 // k)
        for r0 in range(0, k, rows_per_chunk):
            rows = np.arange(r0, min(k, r0 + rows_per_chunk))
            gx, gy = np.meshgrid(cols, rows)
            cells = np.stack([gx.ravel(), gy.ravel()], axis=1)
            tally(lo + (hi - lo) * (cells + rng.random(cells.shape)) / k)
    left = n_samples - k * k
    while left > 0:
        m = min(250_000, left)
        tally(lo + (hi - lo) * rng.random((m, 2)))
        left -= m
    return both / either if either else 0.0
