"""Command-line entry point.

Exit codes: 0 success, 2 config or input error, 3 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..metrics import RotatedBox, edit_distance, rotated_iou
from ..surrogate import NumericalError, PoolUnderfilledError
from .config import ConfigError, load_config, resolve
from .pipelines import (
    SchemaVersionError,
    run_build_pool,
    run_posttune,
    run_pretrain,
    run_report,
    run_train_surrogate,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("deepsurrogate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _parse_box(text: str) -> RotatedBox:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 6:
        raise ValueError(f"a box needs 6 numbers cx,cy,w,h,cos,sin; got {text!r}")
    return RotatedBox.from_array([float(p) for p in parts])


def cmd_eval_metric(args) -> int:
    if args.metric == "ed":
        if len(args.inputs) != 2:
            raise ValueError("ed takes exactly two strings")
        print(edit_distance(*args.inputs))
    else:
        if len(args.inputs) != 2:
            raise ValueError("iou takes exactly two boxes")
        a, b = (_parse_box(t) for t in args.inputs)
        print(f"{rotated_iou(a, b, image_size=tuple(args.image_size)):.6f}")
    return EXIT_OK


def _config(args, task_default: str | None = None) -> dict:
    cfg = load_config(args.config, getattr(args, "task", None) or (None if args.config else task_default))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "mode", None):
        cfg["mode"] = args.mode
    if getattr(args, "checkpoint", None):
        cfg["checkpoint"] = args.checkpoint
    if getattr(args, "pool", None):
        cfg["generator"]["pool"] = args.pool
    if getattr(args, "steps", None) is not None:
        cfg["surrogate"]["steps"] = args.steps
    return resolve(cfg)


def cmd_pretrain(args) -> int:
    summary = run_pretrain(_config(args), args.out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_build_pool(args) -> int:
    path, hist = run_build_pool(_config(args, "ls_iou"), args.out)
    bins = len(hist)
    for i, c in enumerate(hist):
        print(f"[{i / bins:.1f}, {(i + 1) / bins:.1f}) {c}")
    print(path)
    return EXIT_OK


def cmd_train_surrogate(args) -> int:
    report = run_train_surrogate(_config(args), args.out)
    print(json.dumps({"final": report["final"], "eval": report["eval"]}, sort_keys=True))
    return EXIT_OK


def cmd_post_tune(args) -> int:
    report = run_posttune(_config(args), args.out)
    print(json.dumps({"baseline": report["baseline"], "final": report["final"]}, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    summary = run_report(args.run_dir or args.out, eval_on=args.eval_on, window=args.window)
    for p in summary["charts"]:
        print(p)
    if "eval" in summary:
        for src, v in summary["eval"].items():
            print(f"mean_abs_err[{src}] {v:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", default="runs/latest", help="output / run directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="BLAS thread count")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="deepsurrogate", description="Learned metric surrogates and post-tuning on toy tasks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("eval-metric", parents=[common], help="print an exact metric value")
    s.add_argument("metric", choices=["ed", "iou"])
    s.add_argument("inputs", nargs="*", help="two strings, or two boxes as 'cx,cy,w,h,cos,sin'")
    s.add_argument("--image-size", type=float, nargs=2, default=(1.0, 1.0), metavar=("W", "H"))
    s.set_defaults(func=cmd_eval_metric)

    def task_args(s, pool=False):
        s.add_argument("--task", choices=["ls_ed", "ls_iou"], help="use task defaults when no --config")
        s.add_argument("--mode", choices=["global", "local", "local_global"])
        s.add_argument("--checkpoint", help="proxy-pretrained model checkpoint")
        if pool:
            s.add_argument("--pool", help="box pool file (ls_iou)")

    s = sub.add_parser("pretrain", parents=[common], help="proxy-loss pre-training of the task model")
    task_args(s)
    s.set_defaults(func=cmd_pretrain)

    s = sub.add_parser("build-pool", parents=[common], help="build the IoU-binned box pair pool")
    s.add_argument("--task", choices=["ls_iou"])
    s.set_defaults(func=cmd_build_pool)

    s = sub.add_parser("train-surrogate", parents=[common], help="train a surrogate against a frozen model")
    task_args(s, pool=True)
    s.add_argument("--steps", type=int)
    s.set_defaults(func=cmd_train_surrogate)

    s = sub.add_parser("post-tune", parents=[common], help="alternating surrogate / model training")
    task_args(s, pool=True)
    s.set_defaults(func=cmd_post_tune)

    s = sub.add_parser("report", parents=[common], help="render charts for a finished run")
    s.add_argument("run_dir", nargs="?", help="run directory (defaults to --out)")
    s.add_argument("--eval-on", choices=["local", "global"])
    s.add_argument("--window", type=int, default=500)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    limiter = None
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        return args.func(args)
    except (ConfigError, SchemaVersionError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, PoolUnderfilledError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, NumericalError):
            print(json.dumps(exc.diagnostics, default=str), file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
