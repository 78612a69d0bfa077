from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor
from ..embeddings import NORM_EPS, EmbeddingNet


@dataclass
class SurrogateLossConfig:
    lam: float = 10.0
    eps: float = NORM_EPS
    # the penalty pulls the input-gradient norm towards this value; kept at 1
    target: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"penalty weight must be >= 0, got {self.lam}")


@dataclass
class LossTerms:
    loss: Tensor
    ehat: np.ndarray
    grad_norm: np.ndarray
    abs_err: np.ndarray
    penalty: np.ndarray


def surrogate_loss_terms(
    net: EmbeddingNet,
    z,
    y,
    e_true,
    cfg: SurrogateLossConfig,
    weights=None,
) -> LossTerms:
    """Regression-plus-gradient-penalty objective for a batch of (z, y, e) triples.

    Per row: ``(ehat - e)^2 + lam * (||d ehat / d z|| - 1)^2``. Rows are combined
    with ``weights`` (default: the batch mean). ``y`` is treated as a constant.
    """
    z = z if isinstance(z, Tensor) and z.requires_grad else dc.tensor(dc.constant(z).data, requires_grad=True)
    y = dc.constant(y).detach()
    e_true = np.asarray(e_true, dtype=np.float64).reshape(-1)
    n = z.shape[0]
    if weights is None:
        weights = np.full(n, 1.0 / n)
    w = dc.tensor(np.asarray(weights, dtype=np.float64))

    ehat = net.distance(z, y, eps=cfg.eps)
    fit = dc.square(dc.sub(ehat, e_true))
    if cfg.lam > 0:
        gz = dc.grad_graph(dc.sum(ehat), z)
        gnorm = dc.l2norm(dc.reshape(gz, (n, -1)), eps=cfg.eps, axis=-1)
        pen = dc.square(dc.sub(gnorm, cfg.target))
        per_row = dc.add(fit, dc.scale(pen, cfg.lam))
    else:
        # penalty is only logged when it carries no weight
        with dc.no_grad():
            gz = dc.grad(dc.sum(ehat), [z])[0]
        gnorm = dc.tensor(np.sqrt((gz.data.reshape(n, -1) ** 2).sum(axis=1) + cfg.eps))
        pen = dc.tensor((gnorm.data - cfg.target) ** 2)
        per_row = fit
    loss = dc.sum(dc.mul(per_row, w))
    return LossTerms(
        loss=loss,
        ehat=ehat.data.copy(),
        grad_norm=gnorm.data.copy(),
        abs_err=np.abs(ehat.data - e_true),
        penalty=pen.data.copy(),
    )


def surrogate_loss(net: EmbeddingNet, z, y, e_true, cfg: SurrogateLossConfig) -> Tensor:
    """Scalar loss node; ``backward`` on it gives d(loss)/d(params) including the penalty path."""
    return surrogate_loss_terms(net, z, y, e_true, cfg).loss
