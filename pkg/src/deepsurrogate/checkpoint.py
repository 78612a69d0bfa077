"""Checkpoint files: one JSON header line, then raw little-endian float64 parameters.

The header lists every parameter as ``{"name", "shape"}`` in the order the
values follow, plus free-form fields (architecture config, seed, step).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diffcore import ParamSet

MAGIC = "deepsurrogate-ckpt"


def save_checkpoint(path, params: ParamSet, **header) -> None:
    head = dict(header)
    head["format"] = MAGIC
    head["params"] = [{"name": n, "shape": list(params[n].shape)} for n in params]
    with open(path, "wb") as fh:
        fh.write(json.dumps(head, sort_keys=True).encode("utf-8") + b"\n")
        for n in params:
            fh.write(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    head = json.loads(raw[:nl].decode("utf-8"))
    if head.get("format") != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    state = {}
    offset = nl + 1
    for spec in head["params"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(raw, dtype="<f8", count=n, offset=offset)
        state[spec["name"]] = values.reshape(shape).astype(np.float64)
        offset += 8 * n
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after parameters")
    return head, state
