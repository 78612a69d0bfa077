"""Parameter containers, initialisation and optimisers."""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from typing import Iterator

import numpy as np

from .tensor import Tensor, grad


class ParamSet:
    """Ordered collection of named trainable tensors with gradient accumulators."""

    def __init__(self):
        self._params: OrderedDict[str, Tensor] = OrderedDict()
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        self.grads[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for name, t in self._params.items():
            self.grads[name] = np.zeros_like(t.data)

    def accumulate(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            self.grads[name] = self.grads[name] + g

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != t.shape:
                raise ValueError(f"{name}: expected shape {t.shape}, got {value.shape}")
            t.data = value.copy()

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, t in self._params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def norms(self) -> dict[str, float]:
        return {name: float(np.linalg.norm(t.data)) for name, t in self._params.items()}

    def count(self) -> int:
        return int(sum(t.size for t in self._params.values()))


def backward(root: Tensor, params: ParamSet) -> dict[str, np.ndarray]:
    """Accumulate d(root)/d(param) into ``params.grads`` and return the map for this call."""
    names = params.names()
    gs = grad(root, [params[n] for n in names])
    out = {n: g.data for n, g in zip(names, gs)}
    params.accumulate(out)
    return out


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class SGD:
    def __init__(self, params: ParamSet, lr: float):
        self.params = params
        self.lr = lr

    def step(self, grads: dict[str, np.ndarray] | None = None) -> None:
        grads = self.params.grads if grads is None else grads
        for name, t in self.params.items():
            t.data = t.data - self.lr * grads[name]


class Adam:
    def __init__(self, params: ParamSet, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}

    def step(self, grads: dict[str, np.ndarray] | None = None) -> None:
        grads = self.params.grads if grads is None else grads
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, t in self.params.items():
            g = grads[name]
            self.m[name] = self.b1 * self.m[name] + (1.0 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1.0 - self.b2) * g * g
            t.data = t.data - self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)


def make_optimizer(kind: str, params: ParamSet, lr: float):
    kind = kind.lower()
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r} (expected 'adam' or 'sgd')")
