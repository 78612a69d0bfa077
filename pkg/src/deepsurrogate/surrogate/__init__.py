"""Learning the surrogate: objective, random pair generators and the data-source regimes."""

from .boxpool import (
    BoxGenConfig,
    BoxPool,
    PoolPairSource,
    PoolUnderfilledError,
    build_box_pool,
    random_label_boxes,
    read_pool,
    write_pool,
)
from .loss import LossTerms, SurrogateLossConfig, surrogate_loss, surrogate_loss_terms
from .strings import StringGenConfig, StringPairSource, gen_string_pair, sample_distortion
from .training import (
    DataSourceMode,
    NumericalError,
    StepLog,
    combined_loss,
    mean_abs_error,
    running_mean,
    sample_pair,
    train_surrogate,
)

__all__ = [
    "BoxGenConfig",
    "BoxPool",
    "PoolPairSource",
    "PoolUnderfilledError",
    "build_box_pool",
    "random_label_boxes",
    "read_pool",
    "write_pool",
    "LossTerms",
    "SurrogateLossConfig",
    "surrogate_loss",
    "surrogate_loss_terms",
    "StringGenConfig",
    "StringPairSource",
    "gen_string_pair",
    "sample_distortion",
    "DataSourceMode",
    "NumericalError",
    "StepLog",
    "combined_loss",
    "mean_abs_error",
    "running_mean",
    "sample_pair",
    "train_surrogate",
]
