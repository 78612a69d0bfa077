"""Synthetic toy datasets standing in for word crops and detector proposals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..surrogate.boxpool import random_label_boxes
from ..text import DEFAULT_CORPUS, Alphabet

LS_ED = "ls_ed"
LS_IOU = "ls_iou"


@dataclass
class TextDataConfig:
    n_train: int = 4000
    n_test: int = 500
    length: int = 8
    letters: str = Alphabet().letters
    swap_prob: float = 0.15
    noise: float = 0.6
    seed: int = 0


@dataclass
class BoxDataConfig:
    n_train: int = 4000
    n_test: int = 500
    center_noise: float = 0.25  # fraction of the mean side length
    log_size_noise: float = 0.25
    angle_noise_deg: float = 12.0
    seed: int = 0


@dataclass
class ToyDataset:
    """Train/test arrays. ``y`` holds one-hot |A| x L targets or 6-parameter boxes."""

    kind: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    config: dict

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name == "train":
            return self.x_train, self.y_train
        if name == "test":
            return self.x_test, self.y_test
        raise ValueError(f"unknown split {name!r}")


def _render_words(words, cfg: TextDataConfig, rng) -> np.ndarray:
    """One-hot word matrices with random symbol swaps and additive Gaussian noise."""
    a = Alphabet(cfg.letters)
    x = a.encode_batch(words, cfg.length)
    n, A, L = x.shape
    swap = rng.random((n, L)) < cfg.swap_prob
    sym = rng.integers(A, size=(n, L))
    rows, cols = np.nonzero(swap)
    x[rows, :, cols] = 0.0
    x[rows, sym[rows, cols], cols] = 1.0
    return x + cfg.noise * rng.standard_normal(x.shape)


def make_text_dataset(cfg: TextDataConfig, corpus=DEFAULT_CORPUS) -> ToyDataset:
    rng = np.random.default_rng(cfg.seed)
    a = Alphabet(cfg.letters)
    n = cfg.n_train + cfg.n_test
    words = [corpus[i] for i in rng.integers(len(corpus), size=n)]
    x = _render_words(words, cfg, rng)
    y = a.encode_batch(words, cfg.length)
    k = cfg.n_train
    return ToyDataset(LS_ED, x[:k], y[:k], x[k:], y[k:], {"kind": LS_ED, **asdict(cfg)})


def box_features(boxes: np.ndarray) -> np.ndarray:
    """(cx, cy, log w, log h, cos, sin) per row."""
    return np.column_stack([boxes[:, 0], boxes[:, 1], np.log(boxes[:, 2]), np.log(boxes[:, 3]), boxes[:, 4], boxes[:, 5]])


def make_box_dataset(cfg: BoxDataConfig) -> ToyDataset:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_train + cfg.n_test
    clean = random_label_boxes(n, rng)
    side = 0.5 * (clean[:, 2] + clean[:, 3])
    jit = clean.copy()
    jit[:, :2] += cfg.center_noise * side[:, None] * rng.standard_normal((n, 2))
    jit[:, 2:4] *= np.exp(cfg.log_size_noise * rng.standard_normal((n, 2)))
    theta = np.arctan2(clean[:, 5], clean[:, 4]) + math.radians(cfg.angle_noise_deg) * rng.standard_normal(n)
    jit[:, 4], jit[:, 5] = np.cos(theta), np.sin(theta)
    x = box_features(jit)
    k = cfg.n_train
    return ToyDataset(LS_IOU, x[:k], clean[:k], x[k:], clean[k:], {"kind": LS_IOU, **asdict(cfg)})


def make_dataset(cfg: dict) -> ToyDataset:
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == LS_ED:
        return make_text_dataset(TextDataConfig(**cfg))
    if kind == LS_IOU:
        return make_box_dataset(BoxDataConfig(**cfg))
    raise ValueError(f"unknown dataset kind {kind!r}")
