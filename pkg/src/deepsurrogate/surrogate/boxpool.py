"""Precomputed pool of (perturbed box, source box, IoU) triples, balanced over IoU bins.

Pool file layout (little-endian)::

    b"LSPL" | version u32 | count u64 | count * (6 f64 perturbed, 6 f64 source, 1 f64 IoU)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import RotatedBox, rotated_iou

MAGIC = b"LSPL"
VERSION = 1
RECORD_F64 = 13
_HEADER = struct.Struct("<4sIQ")


class PoolUnderfilledError(RuntimeError):
    def __init__(self, counts: np.ndarray, per_bin: int, attempts: int):
        self.counts = counts
        self.per_bin = per_bin
        self.attempts = attempts
        short = {i: int(c) for i, c in enumerate(counts) if c < per_bin}
        super().__init__(
            f"retry budget of {attempts} draws exhausted; bins below {per_bin} entries: {short}"
        )


@dataclass
class BoxGenConfig:
    labels: np.ndarray | None = None
    # each draw scales all three bounds by a strength s ~ U(0, 1)
    max_shift: float = 1.0  # fraction of the mean side length
    max_log_scale: float = math.log(2.0)
    max_angle_deg: float = 45.0
    pool_size: int = 3_000_000
    bins: int = 10
    seed: int = 0
    budget_factor: float = 20.0

    def __post_init__(self):
        if self.pool_size < self.bins:
            raise ValueError(f"pool_size {self.pool_size} < bins {self.bins}")
        if min(self.max_shift, self.max_log_scale, self.max_angle_deg) < 0:
            raise ValueError("perturbation bounds must be non-negative")


def random_label_boxes(n: int, rng: np.random.Generator) -> np.ndarray:
    """Text-like boxes: wider than tall, centres away from the image border, angles in +-45 deg."""
    w = rng.uniform(0.08, 0.3, n)
    h = w / rng.uniform(1.0, 4.0, n)
    t = rng.uniform(-math.pi / 4, math.pi / 4, n)
    return np.stack([rng.uniform(0.25, 0.75, n), rng.uniform(0.25, 0.75, n), w, h, np.cos(t), np.sin(t)], axis=1)


def perturb_box(box: np.ndarray, cfg: BoxGenConfig, rng: np.random.Generator) -> np.ndarray:
    cx, cy, w, h, c, s = box
    k = rng.random()
    side = 0.5 * (w + h)
    dx, dy = k * cfg.max_shift * side * rng.uniform(-1, 1, 2)
    sw, sh = np.exp(k * cfg.max_log_scale * rng.uniform(-1, 1, 2))
    theta = math.atan2(s, c) + k * math.radians(cfg.max_angle_deg) * rng.uniform(-1, 1)
    return np.array([cx + dx, cy + dy, w * sw, h * sh, math.cos(theta), math.sin(theta)])


def iou_bin(iou: float, bins: int) -> int:
    return min(int(iou * bins), bins - 1)


@dataclass
class BoxPool:
    z: np.ndarray
    y: np.ndarray
    iou: np.ndarray
    counts: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.iou)

    def histogram(self, bins: int = 10) -> np.ndarray:
        return np.bincount([iou_bin(v, bins) for v in self.iou], minlength=bins)


def build_box_pool(cfg: BoxGenConfig) -> BoxPool:
    """Draw perturbed label boxes until every IoU bin holds pool_size/bins entries."""
    rng = np.random.default_rng(cfg.seed)
    labels = cfg.labels if cfg.labels is not None else random_label_boxes(1000, rng)
    labels = np.asarray(labels, dtype=np.float64)
    if len(labels) == 0:
        raise ValueError("label pool is empty")
    per_bin = cfg.pool_size // cfg.bins
    counts = np.zeros(cfg.bins, dtype=np.int64)
    z_out, y_out, iou_out = [], [], []
    budget = int(cfg.budget_factor * cfg.pool_size)
    attempts = 0
    while counts.min() < per_bin:
        if attempts >= budget:
            raise PoolUnderfilledError(counts, per_bin, attempts)
        attempts += 1
        src = labels[rng.integers(len(labels))]
        pert = perturb_box(src, cfg, rng)
        iou = rotated_iou(RotatedBox(*pert.tolist()), RotatedBox(*src.tolist()))
        k = iou_bin(iou, cfg.bins)
        if counts[k] >= per_bin:
            continue
        counts[k] += 1
        z_out.append(pert)
        y_out.append(src)
        iou_out.append(iou)
    return BoxPool(np.array(z_out), np.array(y_out), np.array(iou_out), counts)


def write_pool(path, pool: BoxPool) -> None:
    n = len(pool)
    records = np.empty((n, RECORD_F64), dtype="<f8")
    records[:, :6] = pool.z
    records[:, 6:12] = pool.y
    records[:, 12] = pool.iou
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n))
        fh.write(records.tobytes())


def read_pool(path) -> BoxPool:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated pool header")
    magic, version, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported pool version {version}")
    expected = _HEADER.size + n * RECORD_F64 * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    rec = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, RECORD_F64).astype(np.float64)
    return BoxPool(rec[:, :6].copy(), rec[:, 6:12].copy(), rec[:, 12].copy())


class PoolPairSource:
    """Uniform draws from a box pool; the target is the IoU distance 1 - IoU."""

    def __init__(self, pool: BoxPool, seed: int = 0):
        self.pool = pool
        self.rng = np.random.default_rng(seed)
        self.calls = 0

    def batch(self, n: int):
        self.calls += 1
        idx = self.rng.integers(len(self.pool), size=n)
        return self.pool.z[idx], self.pool.y[idx], 1.0 - self.pool.iou[idx]
