"""The experiment pipelines behind the CLI subcommands.

Every run directory holds ``config.json`` (the resolved config), ``run.json``
(kind, seeds, schema versions, input paths) and the pipeline's artifacts, so a
run can be repeated bit-exactly from its own directory.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..embeddings import EmbeddingNet, embedding_from_arch
from ..posttune import (
    LS_ED,
    LS_IOU,
    TaskModel,
    ToyDataset,
    TrainConfig,
    evaluate,
    heldout_proxy_loss,
    make_dataset,
    model_batch,
    model_from_arch,
    posttune_ls,
    pretrain_proxy,
)
from ..surrogate import (
    BoxGenConfig,
    DataSourceMode,
    PoolPairSource,
    StringGenConfig,
    StringPairSource,
    SurrogateLossConfig,
    build_box_pool,
    mean_abs_error,
    read_pool,
    sample_pair,
    train_surrogate,
    write_pool,
)
from .config import ConfigError

log = logging.getLogger(__name__)

CSV_VERSION = 1
CSV_HEADER = ["step", "mean_abs_err", "penalty_term", "loss", "mode", "seed"]
EPOCH_FIELDS = {
    LS_ED: ["epoch", "acc", "ned", "ted", "char_acc", "model_loss"],
    LS_IOU: ["epoch", "mean_iou", "recall", "precision", "f1", "model_loss"],
}


def seeds_for(cfg: dict) -> dict:
    s = int(cfg["seed"])
    return {"run": s, "dataset": s, "model": s + 1, "surrogate": s + 2, "generator": s + 3, "train": s + 4}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _prepare(out: Path, cfg: dict, kind: str, **extra) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg)
    _write_json(out / "run.json", {"kind": kind, "csv_version": CSV_VERSION, "seeds": seeds_for(cfg), **extra})
    return out


def build_dataset(cfg: dict) -> ToyDataset:
    ds = dict(cfg["dataset"])
    ds.setdefault("seed", seeds_for(cfg)["dataset"])
    return make_dataset({"kind": cfg["task"], **ds})


def build_surrogate(cfg: dict) -> EmbeddingNet:
    return embedding_from_arch(cfg["surrogate"]["arch"], seed=seeds_for(cfg)["surrogate"])


def pool_config(cfg: dict, data: ToyDataset) -> BoxGenConfig:
    g = cfg["generator"]
    return BoxGenConfig(
        labels=data.y_train,
        max_shift=g["max_shift"],
        max_log_scale=g["max_log_scale"],
        max_angle_deg=g["max_angle_deg"],
        pool_size=int(g["pool_size"]),
        bins=int(g["bins"]),
        seed=seeds_for(cfg)["generator"],
    )


def build_generator(cfg: dict, data: ToyDataset):
    seed = seeds_for(cfg)["generator"]
    g = cfg["generator"]
    if cfg["task"] == LS_ED:
        kw = {k: g[k] for k in ("b", "corpus", "letters") if k in g}
        return StringPairSource(StringGenConfig(length=cfg["dataset"]["length"], seed=seed, **kw))
    pool = read_pool(g["pool"]) if g.get("pool") else build_box_pool(pool_config(cfg, data))
    return PoolPairSource(pool, seed=seed)


def load_model(path) -> TaskModel:
    return TaskModel.load(path)


# ---------------------------------------------------------------------------


def run_pretrain(cfg: dict, out) -> dict:
    out = _prepare(out, cfg, "pretrain")
    data = build_dataset(cfg)
    m = cfg["model"]
    model = model_from_arch(m["arch"], seed=seeds_for(cfg)["model"])
    losses = pretrain_proxy(
        model, data, int(m["pretrain_steps"]), lr=m["pretrain_lr"], batch_size=m["batch_size"],
        optimizer=m["optimizer"], seed=seeds_for(cfg)["train"],
    )
    heldout = heldout_proxy_loss(model, data)
    limit = m.get("max_heldout_loss")
    if limit is not None and heldout > limit:
        raise RuntimeError(f"held-out proxy loss {heldout:.4f} above threshold {limit}")
    model.save(out / "model.ckpt", step=len(losses))
    summary = {
        "steps": len(losses),
        "final_train_loss": losses[-1] if losses else None,
        "heldout_loss": heldout,
        "test": evaluate(model, data.x_test, data.y_test),
    }
    _write_json(out / "pretrain.json", summary)
    return summary


def run_build_pool(cfg: dict, out) -> tuple[Path, np.ndarray]:
    if cfg["task"] != LS_IOU:
        raise ConfigError("build-pool is only defined for the ls_iou task")
    out = _prepare(out, cfg, "build-pool")
    data = build_dataset(cfg)
    pool = build_box_pool(pool_config(cfg, data))
    path = out / "pool.lspl"
    write_pool(path, pool)
    hist = pool.histogram(int(cfg["generator"]["bins"]))
    _write_json(out / "pool.json", {"count": len(pool), "histogram": hist.tolist()})
    return path, hist


class _CsvLog:
    def __init__(self, path: Path, mode: str, seed: int):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh)
        self.w.writerow(CSV_HEADER)
        self.mode = mode
        self.seed = seed
        self.rows = 0

    def __call__(self, entry):
        step, err, pen, loss = entry if isinstance(entry, tuple) else (entry.step, entry.mean_abs_err, entry.penalty_term, entry.loss)
        self.w.writerow([step, repr(err), repr(pen), repr(loss), self.mode, self.seed])
        self.rows += 1

    def close(self):
        self.fh.close()


def _model_for(cfg: dict, out: Path, data: ToyDataset, required: bool) -> tuple[TaskModel, str | None]:
    path = cfg.get("checkpoint")
    if path:
        return load_model(path), str(path)
    if required:
        raise ConfigError("a proxy-pretrained model checkpoint is required (set 'checkpoint' or pass --checkpoint)")
    run_pretrain(cfg, out / "pretrain")
    return load_model(out / "pretrain" / "model.ckpt"), str(out / "pretrain" / "model.ckpt")


def run_train_surrogate(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mode = DataSourceMode.parse(cfg["mode"])
    data = build_dataset(cfg)
    model, ckpt = (None, None)
    if mode.uses_model or cfg.get("checkpoint"):
        # a global-mode run still evaluates on model pairs when a checkpoint is given
        model, ckpt = _model_for(cfg, out, data, required=False)
    _prepare(out, cfg, "train-surrogate", model_checkpoint=ckpt)
    seeds = seeds_for(cfg)
    net = build_surrogate(cfg)
    gen = build_generator(cfg, data) if mode.uses_generator else None
    s = cfg["surrogate"]
    bs = int(s["batch_size"])
    rng = np.random.default_rng(seeds["train"])

    def draw(step):
        mb = rb = None
        if mode.uses_model:
            idx = rng.integers(len(data.x_train), size=bs)
            mb = model_batch(model, cfg["task"], data.x_train[idx], data.y_train[idx])
        if mode.uses_generator:
            rb = gen.batch(bs)
        return sample_pair(mode, mb, rb)

    t0 = time.perf_counter()
    sink = _CsvLog(out / "metrics.csv", mode.value, seeds["run"])
    try:
        _, history = train_surrogate(
            net, draw, int(s["steps"]), lr=s["lr"], optimizer=s["optimizer"],
            loss_cfg=SurrogateLossConfig(lam=s["lam"]), on_step=sink,
        )
    finally:
        sink.close()
    net.save(out / "surrogate.ckpt", step=len(history))
    report = {
        "kind": "train-surrogate",
        "config": cfg,
        "seeds": seeds,
        "steps": len(history),
        "final": {
            "mean_abs_err": history[-1].mean_abs_err if history else None,
            "penalty_term": history[-1].penalty_term if history else None,
        },
        "eval": evaluate_surrogate(cfg, net, data, model, sources=("local", "global")),
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_json(out / "report.json", report)
    return report


def evaluate_surrogate(cfg: dict, net: EmbeddingNet, data: ToyDataset, model: TaskModel | None, sources=("local",), n: int = 500) -> dict:
    """Mean |ehat - e| on model pairs from the test split ("local") and/or fresh generator pairs ("global")."""
    res = {}
    for src in sources:
        if src == "local":
            if model is None:
                continue
            z, y, e = model_batch(model, cfg["task"], data.x_test[:n], data.y_test[:n])
        elif src == "global":
            gen = build_generator({**cfg, "seed": int(cfg["seed"]) + 1000}, data)
            z, y, e = gen.batch(n)
        else:
            raise ConfigError(f"unknown evaluation source {src!r}")
        res[src] = mean_abs_error(net, z, y, e)
    return res


def run_posttune(cfg: dict, out) -> dict:
    out = Path(out)
    data = build_dataset(cfg)
    model, ckpt = _model_for(cfg, out, data, required=True)
    _prepare(out, cfg, "post-tune", model_checkpoint=ckpt)
    seeds = seeds_for(cfg)
    mode = DataSourceMode.parse(cfg["mode"])
    net = build_surrogate(cfg)
    gen = build_generator(cfg, data) if mode.uses_generator else None
    tcfg = TrainConfig(**cfg["train"], lam=cfg["surrogate"]["lam"], mode=mode.value, seed=seeds["train"])
    t0 = time.perf_counter()
    sink = _CsvLog(out / "metrics.csv", mode.value, seeds["run"])
    try:
        res = posttune_ls(model, net, data, tcfg, generator=gen, on_surrogate_step=sink)
    finally:
        sink.close()
    fields = EPOCH_FIELDS[cfg["task"]]
    with open(out / "epochs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for row in res.epochs:
            w.writerow([repr(row[f]) if isinstance(row[f], float) else row[f] for f in fields])
    model.save(out / "model.ckpt", step=tcfg.epochs * tcfg.steps_b)
    net.save(out / "surrogate.ckpt", step=tcfg.epochs * tcfg.steps_a)
    per_epoch = {f: [row[f] for row in res.epochs] for f in fields if f != "epoch"}
    report = {
        "kind": "post-tune",
        "config": cfg,
        "seeds": seeds,
        "baseline": res.baseline,
        "per_epoch": per_epoch,
        "final": res.final,
        "surrogate_eval": evaluate_surrogate(cfg, net, data, model),
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_json(out / "report.json", report)
    return report


# ---------------------------------------------------------------------------


class SchemaVersionError(ValueError):
    pass


def read_metrics_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise SchemaVersionError(f"{path}: unexpected header {rows[0] if rows else None}")
    body = rows[1:]
    return {
        "step": np.array([int(r[0]) for r in body]),
        "mean_abs_err": np.array([float(r[1]) for r in body]),
        "penalty_term": np.array([float(r[2]) for r in body]),
        "loss": np.array([float(r[3]) for r in body]),
    }


def run_report(run_dir, eval_on: str | None = None, window: int = 500) -> dict:
    from .charts import curve_chart

    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "run.json").read_text())
    except FileNotFoundError:
        raise ConfigError(f"{run_dir} is not a run directory (run.json missing)") from None
    if manifest.get("csv_version") != CSV_VERSION:
        raise SchemaVersionError(f"CSV schema version {manifest.get('csv_version')!r} != supported {CSV_VERSION}")
    cfg = json.loads((run_dir / "config.json").read_text())
    summary: dict = {"run": str(run_dir), "kind": manifest["kind"], "charts": []}
    charts = run_dir / "charts"
    charts.mkdir(exist_ok=True)
    if (run_dir / "metrics.csv").exists():
        m = read_metrics_csv(run_dir / "metrics.csv")
        summary["rows"] = len(m["step"])
        for key, title, fname in (
            ("mean_abs_err", "surrogate approximation error |ehat - e|", "approx_error.svg"),
            ("penalty_term", "gradient penalty (||d ehat/dz|| - 1)^2", "penalty.svg"),
        ):
            p = charts / fname
            curve_chart(p, m["step"], m[key], title=title, xlabel="surrogate step", ylabel=key, window=window)
            summary["charts"].append(str(p))
    if (run_dir / "epochs.csv").exists():
        with open(run_dir / "epochs.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        metric = "ted" if cfg["task"] == LS_ED else "mean_iou"
        p = charts / "epoch_metric.svg"
        curve_chart(
            p, [int(r["epoch"]) for r in rows], [float(r[metric]) for r in rows],
            title=f"test {metric} per epoch", xlabel="epoch", ylabel=metric, window=1, markers=True,
        )
        summary["charts"].append(str(p))
    if eval_on is not None:
        net = EmbeddingNet.load(run_dir / "surrogate.ckpt")
        data = build_dataset(cfg)
        model_path = manifest.get("model_checkpoint")
        if eval_on == "local" and not model_path:
            raise ConfigError("run has no model checkpoint to draw local pairs from")
        if model_path and not Path(model_path).exists():
            raise ConfigError(
                f"model checkpoint {model_path!r} recorded in run.json not found; "
                "relative paths resolve against the directory the run was started from"
            )
        model = load_model(model_path) if model_path else None
        summary["eval"] = evaluate_surrogate(cfg, net, data, model, sources=(eval_on,))
    return summary


def strip_wall_clock(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "wall_clock_s"}
