"""Command-line interface: ``train``, ``eval``, and ``sweep-dim``.

Exit codes: 0 on success, 1 on runtime failure (diverged training, corrupt
model file), 2 on usage or configuration errors (unknown flags, missing or
malformed dataset).
"""

from __future__ import annotations

import argparse
import json
import sys

from .datasets import DatasetError, load_dataset, preprocess
from .harness import (METHODS, ExperimentConfig, evaluate_model,
                      run_experiment, sweep_dims)
from .multiclass import ModelFileError
from .prototypes import DivergenceError

_LOSS_FLAG = {"hinge": "hinge", "sq-hinge": "squared_hinge"}

_CONFIG_FIELDS = ("dataset", "data_dir", "method", "encoder", "dim", "sigma",
                  "lr", "reg_c", "batch_size", "epochs", "similarity", "loss",
                  "optimizer", "runs", "seed", "out_dir", "jobs",
                  "renorm_baselines")


class UsageError(Exception):
    pass


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=["mnist", "fashion", "har"])
    p.add_argument("--data-dir")
    p.add_argument("--method", choices=list(METHODS))
    p.add_argument("--encoder", choices=["onlinehd", "rff"])
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--reg-c", type=float)
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--sim", choices=["dot", "cosine"], dest="similarity")
    p.add_argument("--loss", choices=list(_LOSS_FLAG))
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-renorm", action="store_true",
                   help="disable per-epoch prototype normalization of the "
                        "perceptron/onlinehd baselines")
    p.add_argument("--config", help="JSON config file; flags override it")


def _build_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        try:
            with open(args.config) as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        unknown = set(loaded) - set(_CONFIG_FIELDS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for name in _CONFIG_FIELDS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    if args.no_renorm:
        values["renorm_baselines"] = False
    if "loss" in values:
        values["loss"] = _LOSS_FLAG.get(values["loss"], values["loss"])
    if "dataset" not in values or "data_dir" not in values:
        raise UsageError("--dataset and --data-dir are required")
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    try:
        data = preprocess(load_dataset(cfg.dataset, cfg.data_dir))
    except (FileNotFoundError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    records, summary = run_experiment(cfg, data)
    for r in records:
        print(f"run {r.run} (seed {r.seed}): final test acc "
              f"{r.final_test_acc:.4f} [{r.wall_time_s:.1f} s]")
    print(f"mean final test acc {summary['mean_final_test_acc']:.4f} "
          f"(p5 {summary['p5_final_test_acc']:.4f}, "
          f"p95 {summary['p95_final_test_acc']:.4f}) over "
          f"{summary['runs']} runs -> {cfg.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    try:
        dims = [int(tok) for tok in args.dims.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --dims value {args.dims!r}") from exc
    if not dims:
        raise UsageError("--dims must list at least one dimension")
    cfg = _build_config(args)
    try:
        results = sweep_dims(cfg, dims)
    except (FileNotFoundError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for dim, summary in results.items():
        print(f"D={dim}: mean final test acc "
              f"{summary['mean_final_test_acc']:.4f}")
    return 0


def _cmd_eval(args) -> int:
    try:
        data = preprocess(load_dataset(args.dataset, args.data_dir))
    except (FileNotFoundError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = evaluate_model(args.model, data, args.split)
    print(f"{args.split} accuracy: {report['accuracy']:.4f} "
          f"({report['n_points']} points)")
    print("confusion (rows: true class, cols: predicted):")
    for row in report["confusion"]:
        print("  " + " ".join(f"{v:6d}" for v in row))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hdmargin",
        description="Train and evaluate margin-based hyperdimensional "
                    "classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run seeded training experiments")
    _add_train_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep-dim",
                             help="repeat training across hypervector sizes")
    _add_train_flags(p_sweep)
    p_sweep.add_argument("--dims", required=True,
                         help="comma-separated hypervector sizes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--dataset", required=True,
                        choices=["mnist", "fashion", "har"])
    p_eval.add_argument("--data-dir", required=True)
    p_eval.add_argument("--split", choices=["test", "train"], default="test")
    p_eval.set_defaults(func=_cmd_eval)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, ModelFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
