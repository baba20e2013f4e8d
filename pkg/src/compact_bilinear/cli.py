"""Command-line harness.

Exit codes: 0 success, 1 argument or validation error, 2 I/O or file-format
error, 3 gradient check above threshold.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import experiments as ex
from .core import FormatError
from .gradcheck import DEFAULT_EPS, METHODS as GRAD_METHODS, PASS_THRESHOLD, run_gradcheck
from .io import LabelTable, read_grid, read_labels, read_pooled, write_grid, write_labels, write_pooled
from .postproc import DEFAULT_LAMBDA, LinearModel, predict, train_logreg

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_THRESHOLD = 0, 1, 2, 3

SWEEP_NOTE = ("relative error of compact kernel estimates against the exact bilinear kernel "
              "on random non-negative grids (kernel convergence only, not classification error)")


class ArgError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _require(cond, msg):
    if not cond:
        raise ArgError(msg)


def _check_pool_args(method, dim):
    _require(method in ex.POOL_METHODS, f"--method must be one of {', '.join(ex.POOL_METHODS)}")
    if method == "bilinear":
        _require(dim is None, "--dim is not allowed for bilinear pooling (output is c**2)")
    else:
        _require(dim is not None and dim >= 1, f"--dim >= 1 is required for {method}")


def _print_csv(fields, rows, out=None):
    writer = csv.writer(out or sys.stdout, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([ex.fmt(v) for v in row])


# --- commands -------------------------------------------------------------------


def cmd_pool(args):
    _check_pool_args(args.method, args.dim)
    _require(args.input and args.output, "--input and --output are required")
    grid = read_grid(args.input)
    feats = ex.pool(grid, args.method, args.dim, seed=args.seed, normalized=not args.no_normalize)
    write_pooled(args.output, feats)
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} {args.method} descriptors to {args.output}")
    return EXIT_OK


def cmd_kernel_sweep(args):
    _require(args.dim, "--dim needs at least one projection dimension")
    _require(min(args.dim) >= 1, "projection dimensions must be >= 1")
    _require(args.pairs >= 1 and args.trials >= 1, "--pairs and --trials must be >= 1")
    _require(args.c >= 1 and args.h >= 1 and args.w >= 1, "--c, --h, --w must be >= 1")
    methods = args.method.split(",") if args.method else list(ex.SWEEP_METHODS)
    _require(all(m in ex.SWEEP_METHODS for m in methods), "sweep methods are rm and ts")
    rows = ex.kernel_sweep(args.c, args.dim, args.pairs, args.trials, args.seed,
                           h=args.h, w=args.w, methods=methods)
    if args.output:
        ex.write_sweep_csv(args.output, rows, note=SWEEP_NOTE)
    else:
        _print_csv(ex.SweepRow.FIELDS, [r.values() for r in rows])
    return EXIT_OK


def cmd_gradcheck(args):
    _require(args.method in GRAD_METHODS, f"--method must be one of {', '.join(GRAD_METHODS)}")
    _require(args.eps > 0, "--eps must be positive")
    dim = args.dim if args.dim is not None else 16
    errors = run_gradcheck(args.method, args.c, dim, args.h, args.w, args.seed, args.eps)
    for name, err in errors.items():
        print(f"{args.method} d/d{name}: max relative error {ex.fmt(err)}")
    worst = max(errors.values())
    ok = worst < PASS_THRESHOLD
    print(f"{'PASS' if ok else 'FAIL'} max relative error {ex.fmt(worst)} (threshold {PASS_THRESHOLD:g})")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_bench(args):
    _check_pool_args(args.method, args.dim)
    _require(args.reps >= 5, "--reps must be >= 5")
    _require(min(args.c, args.h, args.w, args.n) >= 1, "--c, --h, --w, --n must be >= 1")
    row = ex.bench(args.method, args.c, args.dim, args.h, args.w, args.reps, n=args.n, seed=args.seed)
    _print_csv(ex.BenchRow.FIELDS, [row.values()])
    return EXIT_OK


def cmd_synth(args):
    _require(args.classes >= 2, "--classes must be >= 2")
    _require(args.spread >= 0, "--spread must be non-negative")
    _require(args.per_class >= 1, "--per-class must be >= 1")
    _require(args.output and args.labels, "--output (grid file) and --labels are required")
    grid, labels = ex.make_synth(args.classes, args.per_class, args.c, args.h, args.w,
                                 args.spread, args.seed)
    write_grid(args.output, grid)
    write_labels(args.labels, labels)
    print(f"wrote {grid.n} samples ({args.classes} classes) to {args.output}, labels to {args.labels}")
    return EXIT_OK


def cmd_fewshot(args):
    _check_pool_args(args.method, args.dim)
    _require(args.input and args.labels, "--input and --labels are required")
    _require(args.shots and min(args.shots) >= 1, "--shots must list positive integers")
    _require(args.trials >= 1, "--trials must be >= 1")
    grid = read_grid(args.input)
    labels = read_labels(args.labels, n=grid.n)
    rows = ex.fewshot_experiment(grid, labels, args.method, args.dim, args.shots, args.trials,
                                 args.seed, test_per_class=args.test_per_class)
    _print_csv(("shots", "mean_accuracy", "std"), [(r.shots, r.mean, r.std) for r in rows])
    return EXIT_OK


def cmd_train(args):
    _require(args.input and args.labels and args.output, "--input, --labels and --output are required")
    _require(args.lam >= 0, "--lambda must be non-negative")
    X = read_pooled(args.input)
    labels = read_labels(args.labels, n=len(X))
    model = train_logreg(X, labels, k=args.classes, lam=args.lam)
    np.savez(args.output, weights=model.weights, bias=model.bias, lam=model.lam)
    print(f"trained {model.k}-class model on {len(X)} samples, dim {model.dim}; "
          f"final objective {ex.fmt(float(model.history[-1]))}")
    return EXIT_OK


def load_model(path) -> LinearModel:
    with np.load(path) as z:
        return LinearModel(z["weights"], z["bias"], float(z["lam"]))


def cmd_eval(args):
    _require(args.input and args.model, "--input and --model are required")
    X = read_pooled(args.input)
    model = load_model(args.model)
    ids, probs = predict(model, X)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            _print_csv(["index", "predicted"] + [f"p{j}" for j in range(model.k)],
                       [[i, int(c), *map(float, p)] for i, (c, p) in enumerate(zip(ids, probs))], fh)
    if args.labels:
        labels: LabelTable = read_labels(args.labels, n=len(X))
        y = labels.dense(len(X))
        print(f"accuracy {ex.fmt(float(np.mean(ids == y)))} on {len(X)} samples")
    else:
        print(f"predicted {len(X)} samples")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compact-bilinear", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method_default=None):
        p.add_argument("--method", default=method_default)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = common(sub.add_parser("pool", help="pool a grid file"), "ts")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("kernel-sweep", help="kernel approximation error vs projection dimension")
    p.add_argument("--method", default=None, help="comma list of rm,ts (default both)")
    p.add_argument("--dim", type=_int_list, default=[64, 128, 256, 512, 1024, 2048, 4096, 8192])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=int, default=32)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--output")
    p.set_defaults(func=cmd_kernel_sweep)

    p = common(sub.add_parser("gradcheck", help="finite-difference gradient check"), "ts")
    p.add_argument("--c", type=int, default=8)
    p.add_argument("--h", type=int, default=2)
    p.add_argument("--w", type=int, default=2)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.set_defaults(func=cmd_gradcheck)

    p = common(sub.add_parser("bench", help="time forward and backward passes"), "ts")
    p.add_argument("--c", type=int, default=512)
    p.add_argument("--h", type=int, default=13)
    p.add_argument("--w", type=int, default=13)
    p.add_argument("--n", type=int, default=1, help="batch size")
    p.add_argument("--reps", type=int, default=9)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic labelled grid file")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--c", type=int, default=32)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--spread", type=float, default=ex.CALIBRATED_SPREAD)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.add_argument("--labels")
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("fewshot", help="few-shot accuracy vs shots per class"), "ts")
    p.add_argument("--input")
    p.add_argument("--labels")
    p.add_argument("--shots", type=_int_list, default=[1, 2, 3, 7, 14])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--test-per-class", type=int, default=None)
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser("train", help="train a logistic regression on a pooled file")
    p.add_argument("--input")
    p.add_argument("--labels")
    p.add_argument("--output", help="model file (.npz)")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="apply a trained model to a pooled file")
    p.add_argument("--input")
    p.add_argument("--model")
    p.add_argument("--labels")
    p.add_argument("--output", help="optional predictions CSV")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ARGS
    try:
        return args.func(args)
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
