"""Post-tuning task models against a learned surrogate."""

from .data import (
    LS_ED,
    LS_IOU,
    BoxDataConfig,
    TextDataConfig,
    ToyDataset,
    make_box_dataset,
    make_dataset,
    make_text_dataset,
)
from .models import BoxRegressor, RegressorConfig, RecognizerConfig, StringRecognizer, TaskModel, model_from_arch
from .train import (
    FreezeViolation,
    PostTuneResult,
    TrainConfig,
    evaluate,
    evaluate_predictions,
    heldout_proxy_loss,
    model_batch,
    pair_metric,
    posttune_ls,
    pretrain_proxy,
    proxy_loss,
    task_of,
)

__all__ = [
    "LS_ED",
    "LS_IOU",
    "BoxDataConfig",
    "TextDataConfig",
    "ToyDataset",
    "make_box_dataset",
    "make_dataset",
    "make_text_dataset",
    "BoxRegressor",
    "RegressorConfig",
    "RecognizerConfig",
    "StringRecognizer",
    "TaskModel",
    "model_from_arch",
    "FreezeViolation",
    "PostTuneResult",
    "TrainConfig",
    "evaluate",
    "evaluate_predictions",
    "heldout_proxy_loss",
    "model_batch",
    "pair_metric",
    "posttune_ls",
    "pretrain_proxy",
    "proxy_loss",
    "task_of",
]
