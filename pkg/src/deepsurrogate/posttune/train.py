"""Proxy pre-training, alternating surrogate/model post-tuning, and evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .. import diffcore as dc
from ..embeddings import EmbeddingNet
from ..metrics import edit_distance, iou_arrays, normalized_similarity
from ..surrogate import (
    DataSourceMode,
    NumericalError,
    SurrogateLossConfig,
    combined_loss,
    sample_pair,
)
from ..text import Alphabet
from .data import LS_ED, LS_IOU, ToyDataset
from .models import BoxRegressor, StringRecognizer, TaskModel

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    steps_a: int = 500
    steps_b: int = 500
    lr_a: float = 1e-4
    lr_b: float = 1e-4
    batch_size: int = 32
    lam: float = 10.0
    mode: str = DataSourceMode.LOCAL_GLOBAL.value
    optimizer_a: str = "adam"
    optimizer_b: str = "adam"
    seed: int = 0

    def __post_init__(self):
        self.mode = DataSourceMode.parse(self.mode).value
        if self.epochs < 0 or self.steps_a < 0 or self.steps_b < 0 or self.batch_size <= 0:
            raise ValueError("epochs/steps must be non-negative and batch_size positive")
        if self.lr_a < 0 or self.lr_b < 0:
            raise ValueError("learning rates must be non-negative")


# ---------------------------------------------------------------------------
# metric plumbing
# ---------------------------------------------------------------------------


def task_of(model: TaskModel) -> str:
    if isinstance(model, StringRecognizer):
        return LS_ED
    if isinstance(model, BoxRegressor):
        return LS_IOU
    raise TypeError(f"no task for {type(model).__name__}")


def _alphabet(z: np.ndarray) -> Alphabet:
    letters = Alphabet().letters
    if z.shape[1] - 1 != len(letters):
        letters = "".join(chr(ord("a") + i) for i in range(z.shape[1] - 1))
    return Alphabet(letters)


def pair_metric(task: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """True metric value regressed by the surrogate: edit distance, or 1 - IoU for boxes."""
    if task == LS_ED:
        a = _alphabet(z)
        return np.array(
            [edit_distance(p, t) for p, t in zip(a.decode_batch(z), a.decode_batch(y))], dtype=np.float64
        )
    if task == LS_IOU:
        return 1.0 - iou_arrays(z, y)
    raise ValueError(f"unknown task {task!r}")


def evaluate(model: TaskModel, x: np.ndarray, y: np.ndarray, metric: str | None = None) -> dict:
    """Evaluation statistics on one split.

    Strings: exact-match accuracy, mean normalised similarity (NED), total edit
    distance (TED), per-position accuracy. Boxes: mean IoU, and recall,
    precision, F1 with each prediction matched to its own target at IoU >= 0.5.
    """
    if len(x) == 0:
        raise ValueError("cannot evaluate on an empty split")
    metric = metric or task_of(model)
    z = model.predict(x)
    return evaluate_predictions(metric, z, y)


def evaluate_predictions(metric: str, z: np.ndarray, y: np.ndarray) -> dict:
    if len(z) == 0:
        raise ValueError("cannot evaluate on an empty split")
    if metric == LS_ED:
        a = _alphabet(z)
        pred, gold = a.decode_batch(z), a.decode_batch(y)
        eds = [edit_distance(p, g) for p, g in zip(pred, gold)]
        return {
            "acc": float(np.mean([p == g for p, g in zip(pred, gold)])),
            "ned": float(np.mean([normalized_similarity(p, g) for p, g in zip(pred, gold)])),
            "ted": int(sum(eds)),
            "char_acc": float(np.mean(z.argmax(axis=1) == y.argmax(axis=1))),
            "n": len(pred),
        }
    if metric == LS_IOU:
        ious = iou_arrays(z, y)
        tp = int(np.count_nonzero(ious >= 0.5))
        n = len(ious)
        recall = tp / n
        precision = tp / n
        f1 = 0.0 if tp == 0 else 2 * precision * recall / (precision + recall)
        return {"mean_iou": float(ious.mean()), "recall": recall, "precision": precision, "f1": f1, "n": n}
    raise ValueError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# proxy pre-training
# ---------------------------------------------------------------------------


def smooth_l1(a, b, beta: float = 1.0) -> dc.Tensor:
    d = dc.sub(a, b)
    ad = dc.ops.abs(d)
    small = (ad.data < beta).astype(np.float64)
    quad = dc.scale(dc.square(d), 0.5 / beta)
    lin = dc.sub(ad, 0.5 * beta)
    return dc.mean(dc.add(dc.mul(quad, small), dc.mul(lin, 1.0 - small)))


def proxy_loss(model: TaskModel, x, y) -> dc.Tensor:
    """Per-position cross-entropy for the recogniser, smooth-L1 on box parameters for the regressor."""
    if isinstance(model, StringRecognizer):
        logp = dc.log_softmax(model.logits(x), axis=1)
        n, _, L = logp.shape
        return dc.scale(dc.sum(dc.mul(logp, y)), -1.0 / (n * L))
    return smooth_l1(model.forward(x), y)


def pretrain_proxy(
    model: TaskModel,
    data: ToyDataset,
    steps: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    optimizer: str = "adam",
    seed: int = 0,
) -> list[float]:
    """Train on the proxy loss; returns the per-step training loss."""
    rng = np.random.default_rng(seed)
    opt = dc.make_optimizer(optimizer, model.params, lr)
    losses = []
    for step in range(1, steps + 1):
        idx = rng.integers(len(data.x_train), size=batch_size)
        loss = proxy_loss(model, data.x_train[idx], data.y_train[idx])
        val = float(loss.data)
        if not math.isfinite(val):
            raise NumericalError("proxy loss diverged", {"step": step, "param_norms": model.params.norms()})
        model.params.zero_grad()
        dc.backward(loss, model.params)
        opt.step()
        losses.append(val)
    return losses


def heldout_proxy_loss(model: TaskModel, data: ToyDataset) -> float:
    with dc.no_grad():
        return float(proxy_loss(model, data.x_test, data.y_test).data)


# ---------------------------------------------------------------------------
# alternating post-tuning
# ---------------------------------------------------------------------------


class FreezeViolation(AssertionError):
    pass


@dataclass
class PostTuneResult:
    epochs: list[dict] = field(default_factory=list)
    surrogate_log: list = field(default_factory=list)
    baseline: dict | None = None
    final: dict | None = None


def model_batch(model: TaskModel, task: str, x: np.ndarray, y: np.ndarray):
    """(z, y, e) for the frozen model on inputs ``x``."""
    z = model.predict(x)
    return z, y, pair_metric(task, z, y)


def posttune_ls(
    model: TaskModel,
    surrogate: EmbeddingNet,
    data: ToyDataset,
    cfg: TrainConfig,
    generator=None,
    on_surrogate_step: Callable | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> PostTuneResult:
    """Alternate surrogate updates (model frozen) and model updates (surrogate frozen).

    ``generator`` supplies random pairs via ``.batch(n)``; it is required unless
    the mode is LOCAL. Parameter checksums are compared around each phase.
    """
    mode = DataSourceMode.parse(cfg.mode)
    if mode.uses_generator and generator is None:
        raise ValueError(f"mode {mode.value} needs a random pair generator")
    task = task_of(model)
    rng = np.random.default_rng(cfg.seed)
    loss_cfg = SurrogateLossConfig(lam=cfg.lam)
    opt_a = dc.make_optimizer(cfg.optimizer_a, surrogate.params, cfg.lr_a)
    opt_b = dc.make_optimizer(cfg.optimizer_b, model.params, cfg.lr_b)
    theta = model.params.tensors()
    res = PostTuneResult()
    res.baseline = evaluate(model, data.x_test, data.y_test, task)
    n_train = len(data.x_train)
    step_a = 0
    for epoch in range(1, cfg.epochs + 1):
        sum_theta = model.params.checksum()
        for _ in range(cfg.steps_a):
            step_a += 1
            mb = rb = None
            if mode.uses_model:
                idx = rng.integers(n_train, size=cfg.batch_size)
                mb = model_batch(model, task, data.x_train[idx], data.y_train[idx])
            if mode.uses_generator:
                rb = generator.batch(cfg.batch_size)
            terms = combined_loss(surrogate, sample_pair(mode, mb, rb), loss_cfg)
            val = float(terms.loss.data)
            if not math.isfinite(val):
                raise NumericalError("non-finite surrogate loss", {"epoch": epoch, "step": step_a})
            surrogate.params.zero_grad()
            dc.backward(terms.loss, surrogate.params)
            opt_a.step()
            entry = (step_a, float(terms.abs_err.mean()), float(terms.penalty.mean()), val)
            res.surrogate_log.append(entry)
            if on_surrogate_step is not None:
                on_surrogate_step(entry)
        if model.params.checksum() != sum_theta:
            raise FreezeViolation("model parameters changed during surrogate updates")

        sum_phi = surrogate.params.checksum()
        model_losses = []
        for step in range(cfg.steps_b):
            idx = rng.integers(n_train, size=cfg.batch_size)
            z = model.forward(data.x_train[idx])
            loss = dc.mean(surrogate.distance(z, data.y_train[idx]))
            val = float(loss.data)
            if not math.isfinite(val):
                raise NumericalError("non-finite model loss", {"epoch": epoch, "step": step + 1})
            grads = dc.grad(loss, theta)
            opt_b.step({n: g.data for n, g in zip(model.params.names(), grads)})
            model_losses.append(val)
        if surrogate.params.checksum() != sum_phi:
            raise FreezeViolation("surrogate parameters changed during model updates")

        stats = evaluate(model, data.x_test, data.y_test, task)
        stats["epoch"] = epoch
        stats["model_loss"] = float(np.mean(model_losses)) if model_losses else None
        res.epochs.append(stats)
        log.info("epoch %d %s", epoch, stats)
        if on_epoch is not None:
            on_epoch(stats)
    res.final = evaluate(model, data.x_test, data.y_test, task)
    return res


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
