"""Small task models f(x) that get post-tuned."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import diffcore as dc
from ..checkpoint import load_checkpoint, save_checkpoint
from ..diffcore import ParamSet, Tensor

SIZE_BOUND = 6.0


@dataclass
class RecognizerConfig:
    alphabet_size: int = 12
    length: int = 8
    channels: int = 32
    kernel: int = 3
    slope: float = 0.01


@dataclass
class RegressorConfig:
    in_dim: int = 6
    hidden: int = 64


class TaskModel:
    kind = "base"

    def __init__(self, config, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params = ParamSet()
        self._build(np.random.default_rng(seed))

    def _build(self, rng):
        raise NotImplementedError

    def forward(self, x) -> Tensor:
        raise NotImplementedError

    __call__ = forward

    def predict(self, x) -> np.ndarray:
        with dc.no_grad():
            return self.forward(x).data

    def arch(self) -> dict:
        return {"kind": self.kind, **asdict(self.config)}

    def save(self, path, step: int = 0, **extra) -> None:
        save_checkpoint(path, self.params, arch=self.arch(), seed=self.seed, step=step, **extra)

    @staticmethod
    def load(path) -> TaskModel:
        head, state = load_checkpoint(path)
        model = model_from_arch(head["arch"], seed=head.get("seed", 0))
        model.params.load_state(state)
        return model


class StringRecognizer(TaskModel):
    """Two conv1d layers, one affine layer, softmax over the alphabet in every column."""

    kind = "string_recognizer"

    def _build(self, rng):
        c = self.config
        A, L, C, K = c.alphabet_size, c.length, c.channels, c.kernel
        p = self.params
        p.add("conv0.w", dc.uniform_fan_in(rng, (C, A, K), A * K))
        p.add("conv0.b", np.zeros(C))
        p.add("conv1.w", dc.uniform_fan_in(rng, (C, C, K), C * K))
        p.add("conv1.b", np.zeros(C))
        p.add("fc.w", dc.uniform_fan_in(rng, (C * L, A * L), C * L))
        p.add("fc.b", np.zeros(A * L))

    def logits(self, x) -> Tensor:
        c = self.config
        p = self.params
        pad = c.kernel // 2
        h = dc.leaky_relu(dc.conv1d(x, p["conv0.w"], p["conv0.b"], padding=pad), c.slope)
        h = dc.leaky_relu(dc.conv1d(h, p["conv1.w"], p["conv1.b"], padding=pad), c.slope)
        h = dc.affine(dc.reshape(h, (h.shape[0], -1)), p["fc.w"], p["fc.b"])
        return dc.reshape(h, (h.shape[0], c.alphabet_size, c.length))

    def forward(self, x) -> Tensor:
        return dc.softmax(self.logits(x), axis=1)


class BoxRegressor(TaskModel):
    """Three affine layers; the output is mapped onto valid rotated-box parameters.

    Centres pass through a sigmoid, sizes through exp of a tanh-bounded value,
    and the (cos, sin) pair is normalised to unit length.
    """

    kind = "box_regressor"

    def _build(self, rng):
        c = self.config
        dims = [c.in_dim, c.hidden, c.hidden, 6]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.params.add(f"fc{i}.w", dc.uniform_fan_in(rng, (a, b), a))
            self.params.add(f"fc{i}.b", np.zeros(b))

    def raw(self, x) -> Tensor:
        p = self.params
        h = dc.relu(dc.affine(x, p["fc0.w"], p["fc0.b"]))
        h = dc.relu(dc.affine(h, p["fc1.w"], p["fc1.b"]))
        return dc.affine(h, p["fc2.w"], p["fc2.b"])

    def forward(self, x) -> Tensor:
        r = self.raw(x)
        centre = dc.sigmoid(r[:, 0:2])
        size = dc.exp(dc.scale(dc.tanh(dc.scale(r[:, 2:4], 1.0 / SIZE_BOUND)), SIZE_BOUND))
        rot = r[:, 4:6]
        rot = dc.div(rot, dc.reshape(dc.l2norm(rot, eps=1e-12, axis=-1), (-1, 1)))
        return dc.concat([centre, size, rot], axis=1)


def model_from_arch(arch: dict, seed: int = 0) -> TaskModel:
    arch = dict(arch)
    kind = arch.pop("kind")
    if kind == StringRecognizer.kind:
        return StringRecognizer(RecognizerConfig(**arch), seed=seed)
    if kind == BoxRegressor.kind:
        return BoxRegressor(RegressorConfig(**arch), seed=seed)
    raise ValueError(f"unknown task model kind {kind!r}")
