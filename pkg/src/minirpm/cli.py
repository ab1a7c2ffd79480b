"""Command-line interface.

Exit codes are a stable scripting contract: 0 success, 2 usage or input
error, 3 numerical failure (divergence, failed gradient check, generation
or oracle failure). Every command is deterministic given --seed; when the
seed is omitted one is drawn from entropy and printed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from collections import Counter

import numpy as np

from . import data as dio
from .generator import CONFIGS, GenerationError, generate_dataset
from .model import ABLATIONS, DualContrastNet, ModelConfig
from .oracle import AmbiguousPuzzleError, solve_by_rules
from .training import (
    DivergenceError,
    TrainConfig,
    evaluate,
    run_ablation,
    run_few_shot,
    train,
    write_metrics_csv,
)
from .verification import gradient_suite

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _resolve_seed(seed) -> int:
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**32))
        print(f"seed: {seed} (drawn from entropy)")
    return int(seed)


def _parse_channels(text: str) -> tuple[int, int]:
    try:
        c1, c2 = (int(v) for v in text.split(","))
        return (c1, c2)
    except ValueError as exc:
        raise UsageError(f"--channels expects 'C1,C2', got {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _model_config(args, seed: int, ablation: str, image_size: int) -> ModelConfig:
    return ModelConfig(
        image_size=image_size,
        channels=_parse_channels(args.channels),
        mlp_hidden=args.mlp_hidden,
        dropout_p=args.dropout,
        ablation=ablation,
        seed=seed,
    )


def _load_dataset(path):
    try:
        return dio.load(path)
    except FileNotFoundError as exc:
        raise UsageError(f"dataset not found: {path}") from exc


def _add_model_flags(p):
    p.add_argument("--channels", default="64,128", help="encoder channel plan C1,C2")
    p.add_argument("--mlp-hidden", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.5)


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--config-file",
        default=None,
        help="flat key=value file; keys match long flag names, override defaults",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="minirpm")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("gen", help="generate an oracle-validated puzzle dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--config", choices=CONFIGS, default="center")
    p.add_argument("--size", type=int, default=32, help="panel size in pixels")
    p.add_argument("--out", required=True)
    _add_common(p)
    subparsers["gen"] = p

    p = sub.add_parser("import", help="import RAVEN-style .npz records")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=96)
    _add_common(p)
    subparsers["import"] = p

    p = sub.add_parser("train", help="train a model, write checkpoint and metrics CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--ablation", choices=ABLATIONS, default="full")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--out-ckpt", required=True)
    p.add_argument("--metrics", required=True)
    _add_model_flags(p)
    _add_common(p)
    subparsers["train"] = p

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    _add_common(p)
    subparsers["eval"] = p

    p = sub.add_parser("ablation", help="train contrast-module variants side by side")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--variants", default="full,no_rule_contrast,no_choice_contrast")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    _add_common(p)
    subparsers["ablation"] = p

    p = sub.add_parser("fewshot", help="train on shrinking training-set fractions")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--fractions", default="0.0625,0.125,0.25,0.5,1.0")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--ablation", choices=ABLATIONS, default="full")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    _add_common(p)
    subparsers["fewshot"] = p

    p = sub.add_parser("gradcheck", help="finite-difference check of every op")
    _add_common(p)
    subparsers["gradcheck"] = p

    return parser, subparsers


def _apply_config_file(parser, subparsers, argv):
    """Config-file values override subcommand defaults (not explicit flags)."""
    args = parser.parse_args(argv)
    if getattr(args, "config_file", None) is None:
        return args
    sp = subparsers[args.command]
    known = {a.dest for a in sp._actions}
    overrides = {}
    try:
        with open(args.config_file) as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{args.config_file}:{lineno}: expected key=value, got {line!r}"
                    )
                key, value = (s.strip() for s in line.split("=", 1))
                dest = key.replace("-", "_")
                if dest not in known:
                    raise UsageError(f"{args.config_file}: unknown key {key!r}")
                overrides[dest] = value
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {args.config_file}") from exc
    for action in sp._actions:
        if action.dest in overrides:
            raw = overrides[action.dest]
            action.default = action.type(raw) if action.type else raw
    return parser.parse_args(argv)


def cmd_gen(args) -> int:
    seed = _resolve_seed(args.seed)
    puzzles = generate_dataset(args.n, args.config, args.size, seed)
    validated = sum(1 for p in puzzles if solve_by_rules(p.provenance) == p.answer)
    dio.save(puzzles, args.out)
    hist = Counter(p.answer for p in puzzles)
    print(f"wrote {len(puzzles)} {args.config} puzzles ({args.size}x{args.size}) to {args.out}")
    print("answer histogram:", [hist.get(i, 0) for i in range(8)])
    print(f"oracle validation: {validated}/{len(puzzles)}")
    if validated != len(puzzles):
        raise AmbiguousPuzzleError("oracle disagreed with stored answers")
    return EXIT_OK


def cmd_import(args) -> int:
    puzzles, report = dio.import_external(args.dir, image_size=args.size)
    for name, reason in report.errors:
        print(f"skipped {name}: {reason}", file=sys.stderr)
    print(f"imported {report.imported}/{report.total} records")
    if not puzzles:
        raise UsageError(f"no importable records in {args.dir}")
    dio.save(puzzles, args.out)
    print(f"wrote {len(puzzles)} puzzles to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _resolve_seed(args.seed)
    train_puzzles = _load_dataset(args.data)
    test_puzzles = _load_dataset(args.test)
    image_size = train_puzzles[0].image_size
    model = DualContrastNet(_model_config(args, seed, args.ablation, image_size))
    cfg = TrainConfig(
        batch_size=args.batch_size,
        lr=args.lr,
        epochs=args.epochs,
        seed=seed,
        eval_every=args.eval_every,
    )
    print(
        f"run: variant={args.ablation} seed={seed} epochs={cfg.epochs} "
        f"batch={cfg.batch_size} lr={cfg.lr} channels={args.channels}"
    )
    metrics = train(
        model, *dio.to_arrays(train_puzzles), *dio.to_arrays(test_puzzles), cfg
    )
    total_steps = sum(
        -(-len(train_puzzles) // cfg.batch_size) for _ in range(cfg.epochs)
    )
    model.save(args.out_ckpt, step=total_steps)
    write_metrics_csv(args.metrics, metrics)
    last = metrics.rows[-1]
    print(
        f"final: train_loss={last.train_loss:.4f} train_acc={last.train_acc:.4f} "
        f"test_acc={last.test_acc:.4f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model, _ = DualContrastNet.load(args.ckpt)
    except FileNotFoundError as exc:
        raise UsageError(f"checkpoint not found: {args.ckpt}") from exc
    puzzles = _load_dataset(args.data)
    acc = evaluate(model, *dio.to_arrays(puzzles))
    print(f"accuracy: {acc:.6f} ({len(puzzles)} puzzles)")
    return EXIT_OK


def _write_rows(path, rows, fieldnames):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)


def cmd_ablation(args) -> int:
    seed = _resolve_seed(args.seed)
    train_puzzles = _load_dataset(args.data)
    test_puzzles = _load_dataset(args.test)
    variants = args.variants.split(",")
    for v in variants:
        if v not in ABLATIONS:
            raise UsageError(f"unknown variant {v!r}")
    base = _model_config(args, seed, "full", train_puzzles[0].image_size)
    cfg = TrainConfig(batch_size=args.batch_size, lr=args.lr, epochs=args.epochs, seed=seed)
    rows = run_ablation(
        variants,
        dio.to_arrays(train_puzzles),
        dio.to_arrays(test_puzzles),
        base,
        cfg,
        _parse_int_list(args.seeds),
    )
    _write_rows(args.out, rows, ["variant", "seed", "test_acc"])
    for r in rows:
        print(f"{r['variant']:>20} seed={r['seed']} test_acc={r['test_acc']:.4f}")
    return EXIT_OK


def cmd_fewshot(args) -> int:
    seed = _resolve_seed(args.seed)
    train_puzzles = _load_dataset(args.data)
    test_puzzles = _load_dataset(args.test)
    base = _model_config(args, seed, args.ablation, train_puzzles[0].image_size)
    cfg = TrainConfig(batch_size=args.batch_size, lr=args.lr, epochs=args.epochs, seed=seed)
    rows = run_few_shot(
        _parse_float_list(args.fractions),
        train_puzzles,
        dio.to_arrays(test_puzzles),
        base,
        cfg,
        _parse_int_list(args.seeds),
    )
    _write_rows(args.out, rows, ["fraction", "seed", "train_size", "test_acc"])
    for r in rows:
        print(f"fraction={r['fraction']} seed={r['seed']} test_acc={r['test_acc']:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args.seed)
    failed = False
    for case in gradient_suite(seed):
        status = "PASS" if case.passed else "FAIL"
        skipped = f", skipped {len(case.result.skipped)} tie/kink coords" if case.result.skipped else ""
        print(
            f"{status} {case.name}: max rel err {case.result.max_rel_error:.3e} "
            f"(tol {case.tolerance:.0e}, {case.result.checked} coords{skipped})"
        )
        failed |= not case.passed
    if failed:
        raise DivergenceError("gradient check failed")
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "import": cmd_import,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablation": cmd_ablation,
    "fewshot": cmd_fewshot,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        args = _apply_config_file(parser, subparsers, argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dio.DatasetFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, GenerationError, AmbiguousPuzzleError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
