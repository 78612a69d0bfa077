"""Experiment configuration: JSON with a required ``version`` field, merged over task defaults."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from ..posttune.data import LS_ED, LS_IOU
from ..surrogate import DataSourceMode

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    LS_ED: {
        "version": CONFIG_VERSION,
        "task": LS_ED,
        "mode": "local_global",
        "seed": 0,
        "dataset": {"n_train": 20000, "n_test": 500, "length": 8, "swap_prob": 0.02, "noise": 0.3},
        "generator": {"b": 3},
        "surrogate": {
            "arch": {"kind": "char_cnn", "alphabet_size": 12, "length": 8, "channels": 32, "hidden": 128, "out_dim": 128},
            "lam": 1.0,
            "lr": 1e-3,
            "optimizer": "adam",
            "steps": 10000,
            "batch_size": 32,
        },
        "model": {
            "arch": {"kind": "string_recognizer", "alphabet_size": 12, "length": 8, "channels": 32},
            "pretrain_steps": 10000,
            "pretrain_lr": 1e-3,
            "optimizer": "adam",
            "batch_size": 32,
            "max_heldout_loss": None,
        },
        "train": {
            "epochs": 5,
            "steps_a": 800,
            "steps_b": 200,
            "lr_a": 1e-3,
            "lr_b": 1e-4,
            "batch_size": 32,
            "optimizer_a": "adam",
            "optimizer_b": "adam",
        },
        "checkpoint": None,
    },
    LS_IOU: {
        "version": CONFIG_VERSION,
        "task": LS_IOU,
        "mode": "local_global",
        "seed": 0,
        "dataset": {"n_train": 20000, "n_test": 500},
        "generator": {
            "pool": None,
            "pool_size": 20000,
            "bins": 10,
            "max_shift": 1.0,
            "max_log_scale": 0.6931471805599453,
            "max_angle_deg": 45.0,
        },
        "surrogate": {
            "arch": {"kind": "box_mlp", "widths": [6, 64, 64, 64, 64, 16]},
            "lam": 0.001,
            "lr": 1e-3,
            "optimizer": "adam",
            "steps": 2000,
            "batch_size": 32,
        },
        "model": {
            "arch": {"kind": "box_regressor", "in_dim": 6, "hidden": 64},
            "pretrain_steps": 10000,
            "pretrain_lr": 1e-3,
            "optimizer": "adam",
            "batch_size": 32,
            "max_heldout_loss": None,
        },
        "train": {
            "epochs": 5,
            "steps_a": 800,
            "steps_b": 200,
            "lr_a": 1e-3,
            "lr_b": 3e-4,
            "batch_size": 32,
            "optimizer_a": "adam",
            "optimizer_b": "adam",
        },
        "checkpoint": None,
    },
}


def default_config(task: str) -> dict:
    try:
        return copy.deepcopy(_DEFAULTS[task])
    except KeyError:
        raise ConfigError(f"unknown task {task!r}; expected one of {sorted(_DEFAULTS)}") from None


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "arch":
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(raw: dict) -> dict:
    """Validate a user config and fill in task defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "version" not in raw:
        raise ConfigError("config is missing the required 'version' field")
    if raw["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {raw['version']!r} (expected {CONFIG_VERSION})")
    task = str(raw.get("task", "")).lower().replace("-", "_")
    cfg = deep_merge(default_config(task), {**raw, "task": task})
    try:
        cfg["mode"] = DataSourceMode.parse(cfg["mode"]).value
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for key in ("checkpoint",):
        path = cfg.get(key)
        if path is not None and not Path(path).exists():
            raise ConfigError(f"{key} file not found: {path}")
    pool = cfg["generator"].get("pool") if task == LS_IOU else None
    if pool is not None and not Path(pool).exists():
        raise ConfigError(f"pool file not found: {pool}")
    if cfg["surrogate"]["lam"] < 0:
        raise ConfigError("surrogate.lam must be >= 0")
    return cfg


def load_config(path: str | Path | None, task: str | None = None) -> dict:
    if path is None:
        if task is None:
            raise ConfigError("either --config or a task is required")
        return resolve({"version": CONFIG_VERSION, "task": task})
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(raw)
