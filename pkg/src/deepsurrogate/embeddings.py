"""Embedding networks whose pairwise Euclidean distance is the learned surrogate."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import diffcore as dc
from .checkpoint import load_checkpoint, save_checkpoint
from .diffcore import ParamSet, ShapeError, Tensor

NORM_EPS = 1e-12


@dataclass
class CharCnnConfig:
    alphabet_size: int = 37
    length: int = 25
    channels: int = 128
    kernel: int = 3
    conv_layers: int = 5
    hidden: int = 1024
    out_dim: int = 1024
    slope: float = 0.01

    @classmethod
    def toy(cls, **kw) -> CharCnnConfig:
        base = dict(alphabet_size=12, length=8, channels=32, hidden=128, out_dim=128)
        base.update(kw)
        return cls(**base)


@dataclass
class BoxMlpConfig:
    widths: list[int] = field(default_factory=lambda: [6, 64, 64, 64, 64, 16])


class EmbeddingNet:
    """Base class: ``embed`` maps a batch of inputs to vectors; ``distance`` is the surrogate."""

    kind = "base"
    input_shape: tuple[int, ...] = ()

    def __init__(self, config, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params = ParamSet()
        self._build(np.random.default_rng(seed))

    def _build(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def embed(self, x) -> Tensor:
        x = dc.constant(x)
        single = x.shape == self.input_shape
        if single:
            x = dc.reshape(x, (1,) + x.shape)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"{self.kind}.embed", x.shape, self.input_shape)
        out = self._forward(x)
        return dc.reshape(out, out.shape[1:]) if single else out

    __call__ = embed

    def distance(self, z, y, eps: float = NORM_EPS) -> Tensor:
        """Smoothed L2 distance between the embeddings of ``z`` and ``y`` (one value per row)."""
        hz, hy = self.embed(z), self.embed(y)
        if hz.shape != hy.shape:
            raise ShapeError(f"{self.kind}.distance", dc.constant(z).shape, dc.constant(y).shape)
        return dc.l2norm(dc.sub(hz, hy), eps=eps, axis=-1)

    def arch(self) -> dict:
        return {"kind": self.kind, **asdict(self.config)}

    def save(self, path, step: int = 0, **extra) -> None:
        save_checkpoint(path, self.params, arch=self.arch(), seed=self.seed, step=step, **extra)

    @staticmethod
    def load(path) -> EmbeddingNet:
        head, state = load_checkpoint(path)
        net = embedding_from_arch(head["arch"], seed=head.get("seed", 0))
        net.params.load_state(state)
        return net


class CharCnnEmbedding(EmbeddingNet):
    """Conv1d stack over a |A| x L character-distribution matrix, then two affine layers."""

    kind = "char_cnn"

    def _build(self, rng):
        c = self.config
        self.input_shape = (c.alphabet_size, c.length)
        cin = c.alphabet_size
        for i in range(c.conv_layers):
            fan_in = cin * c.kernel
            self.params.add(f"conv{i}.w", dc.uniform_fan_in(rng, (c.channels, cin, c.kernel), fan_in))
            self.params.add(f"conv{i}.b", np.zeros(c.channels))
            cin = c.channels
        pad = c.kernel // 2
        lout = c.length
        for _ in range(c.conv_layers):
            lout = lout + 2 * pad - c.kernel + 1
        self._flat = c.channels * lout
        self.params.add("fc0.w", dc.uniform_fan_in(rng, (self._flat, c.hidden), self._flat))
        self.params.add("fc0.b", np.zeros(c.hidden))
        self.params.add("fc1.w", dc.uniform_fan_in(rng, (c.hidden, c.out_dim), c.hidden))
        self.params.add("fc1.b", np.zeros(c.out_dim))

    def _forward(self, x):
        c = self.config
        p = self.params
        h = x
        for i in range(c.conv_layers):
            h = dc.leaky_relu(dc.conv1d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], padding=c.kernel // 2), c.slope)
        h = dc.reshape(h, (h.shape[0], self._flat))
        h = dc.leaky_relu(dc.affine(h, p["fc0.w"], p["fc0.b"]), c.slope)
        return dc.affine(h, p["fc1.w"], p["fc1.b"])


class BoxMlpEmbedding(EmbeddingNet):
    """Fully connected ReLU network over 6-parameter rotated boxes."""

    kind = "box_mlp"

    def _build(self, rng):
        w = self.config.widths
        self.input_shape = (w[0],)
        for i, (a, b) in enumerate(zip(w[:-1], w[1:])):
            self.params.add(f"fc{i}.w", dc.uniform_fan_in(rng, (a, b), a))
            self.params.add(f"fc{i}.b", np.zeros(b))

    def _forward(self, x):
        n = len(self.config.widths) - 1
        h = x
        for i in range(n):
            h = dc.affine(h, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"])
            if i < n - 1:
                h = dc.relu(h)
        return h


def embedding_from_arch(arch: dict, seed: int = 0) -> EmbeddingNet:
    arch = dict(arch)
    kind = arch.pop("kind")
    if kind == CharCnnEmbedding.kind:
        return CharCnnEmbedding(CharCnnConfig(**arch), seed=seed)
    if kind == BoxMlpEmbedding.kind:
        return BoxMlpEmbedding(BoxMlpConfig(**arch), seed=seed)
    raise ValueError(f"unknown embedding kind {kind!r}")


def surrogate_value(net: EmbeddingNet, z, y, eps: float = NORM_EPS) -> Tensor:
    """Learned surrogate: distance between the embeddings of prediction and target."""
    return net.distance(z, y, eps=eps)
