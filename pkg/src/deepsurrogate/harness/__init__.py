"""Experiment orchestration: configs, pipelines, charts and the CLI."""

from .config import CONFIG_VERSION, ConfigError, default_config, load_config, resolve
from .pipelines import (
    CSV_HEADER,
    CSV_VERSION,
    SchemaVersionError,
    read_metrics_csv,
    run_build_pool,
    run_posttune,
    run_pretrain,
    run_report,
    run_train_surrogate,
    strip_wall_clock,
)

__all__ = [
    "CONFIG_VERSION",
    "ConfigError",
    "default_config",
    "load_config",
    "resolve",
    "CSV_HEADER",
    "CSV_VERSION",
    "SchemaVersionError",
    "read_metrics_csv",
    "run_build_pool",
    "run_posttune",
    "run_pretrain",
    "run_report",
    "run_train_surrogate",
    "strip_wall_clock",
]
