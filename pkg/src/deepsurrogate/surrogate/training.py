from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import diffcore as dc
from ..embeddings import EmbeddingNet
from .loss import SurrogateLossConfig, surrogate_loss_terms

log = logging.getLogger(__name__)

Batch = tuple  # (z, y, e) arrays with a leading batch axis


class DataSourceMode(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    LOCAL_GLOBAL = "local_global"

    @classmethod
    def parse(cls, value) -> DataSourceMode:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for m in cls:
            if m.value == key or m.name.lower() == key:
                return m
        raise ValueError(f"unknown data-source mode {value!r}; expected one of {[m.value for m in cls]}")

    @property
    def uses_model(self) -> bool:
        return self is not DataSourceMode.GLOBAL

    @property
    def uses_generator(self) -> bool:
        return self is not DataSourceMode.LOCAL


class NumericalError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        self.diagnostics = diagnostics
        super().__init__(f"{message}: {diagnostics}")


def _nonempty(batch) -> bool:
    return batch is not None and len(batch[0]) > 0


def sample_pair(mode, model_batch: Batch | None = None, random_batch: Batch | None = None) -> list[Batch]:
    """Select the batches a surrogate step trains on.

    GLOBAL uses the generator batch, LOCAL the model batch, LOCAL_GLOBAL both;
    the step loss is the sum of the per-batch losses.
    """
    mode = DataSourceMode.parse(mode)
    out = []
    if mode.uses_model:
        if not _nonempty(model_batch):
            raise ValueError(f"mode {mode.value} needs a model batch")
        out.append(model_batch)
    if mode.uses_generator:
        if not _nonempty(random_batch):
            raise ValueError(f"mode {mode.value} needs a random-generator batch")
        out.append(random_batch)
    return out


def combined_loss(net: EmbeddingNet, batches: Sequence[Batch], cfg: SurrogateLossConfig):
    """Sum over batches of the batch-mean loss, evaluated in one pass."""
    z = np.concatenate([np.asarray(b[0], dtype=np.float64) for b in batches])
    y = np.concatenate([np.asarray(b[1], dtype=np.float64) for b in batches])
    e = np.concatenate([np.asarray(b[2], dtype=np.float64).reshape(-1) for b in batches])
    w = np.concatenate([np.full(len(b[0]), 1.0 / len(b[0])) for b in batches])
    return surrogate_loss_terms(net, z, y, e, cfg, weights=w)


@dataclass
class StepLog:
    step: int
    mean_abs_err: float
    penalty_term: float
    loss: float


def train_surrogate(
    net: EmbeddingNet,
    draw: Callable[[int], Sequence[Batch]],
    steps: int,
    lr: float = 1e-4,
    optimizer="adam",
    loss_cfg: SurrogateLossConfig | None = None,
    start_step: int = 0,
    on_step: Callable[[StepLog], None] | None = None,
):
    """Run ``steps`` gradient steps on the surrogate objective.

    ``draw(step)`` returns the list of batches for that step (see
    :func:`sample_pair`). ``optimizer`` is a name or an existing optimizer
    instance, so callers can keep Adam moments across calls. Returns the
    optimizer and the per-step log.
    """
    loss_cfg = loss_cfg or SurrogateLossConfig()
    opt = dc.make_optimizer(optimizer, net.params, lr) if isinstance(optimizer, str) else optimizer
    history: list[StepLog] = []
    for i in range(steps):
        step = start_step + i + 1
        batches = draw(step)
        terms = combined_loss(net, batches, loss_cfg)
        loss_val = float(terms.loss.data)
        if not np.isfinite(loss_val):
            raise NumericalError(
                "non-finite surrogate loss",
                {
                    "step": step,
                    "batch_sizes": [len(b[0]) for b in batches],
                    "targets": np.concatenate([np.ravel(b[2]) for b in batches]).tolist()[:16],
                    "param_norms": net.params.norms(),
                },
            )
        net.params.zero_grad()
        dc.backward(terms.loss, net.params)
        opt.step()
        entry = StepLog(step, float(terms.abs_err.mean()), float(terms.penalty.mean()), loss_val)
        history.append(entry)
        if on_step is not None:
            on_step(entry)
    return opt, history


def running_mean(values, window: int = 500) -> np.ndarray:
    """Trailing moving average (shorter window at the start)."""
    v = np.asarray(values, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def mean_abs_error(net: EmbeddingNet, z, y, e) -> float:
    """Mean |ehat - e| over a set of pairs, without building a graph."""
    with dc.no_grad():
        ehat = net.distance(z, y).data
    return float(np.mean(np.abs(ehat - np.asarray(e, dtype=np.float64).reshape(-1))))
