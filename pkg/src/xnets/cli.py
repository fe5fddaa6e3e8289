"""``xnets`` command line: gen, measure, verify, count, train, compare.

Exit codes: 0 success, 1 validation failure, 2 I/O or dataset error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import verify as suites
from .arch import layer_costs, load_arch, mac_count, param_count
from .bench import SweepSpec, run_sweep, summary_rows, write_compare_csv
from .data import load_cifar10, synthetic_dataset
from .errors import DatasetError, XNetError
from .graphs import (
    CayleyParams,
    cayley_expander,
    dense_graph,
    grouped_graph,
    load_graph,
    random_expander,
    save_graph,
    validate,
)
from .spectral import spectral_gap, vertex_expansion
from .trainer import TrainConfig, train, write_metrics_csv

log = logging.getLogger("xnets")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ------------------------------------------------------------------ commands


def cmd_gen(args) -> int:
    if args.type == "random":
        g = random_expander(args.n, args.n_out or args.n, args.degree, seed=args.seed)
    elif args.type == "cayley":
        if not args.generators:
            raise XNetError("--generators is required for --type cayley")
        g = cayley_expander(CayleyParams.from_strings(args.generators.split(",")))
    elif args.type == "grouped":
        g = grouped_graph(args.n, args.n_out or args.n, args.groups)
    else:
        g = dense_graph(args.n, args.n_out or args.n)
    out = args.out or "graph.json"
    save_graph(g, out)
    print(json.dumps({"written": out, "kind": g.kind, "n_in": g.n_in, "n_out": g.n_out,
                      "degree": g.degree, "edges": g.num_edges}))
    return EXIT_OK


def cmd_measure(args) -> int:
    g = load_graph(args.graph)
    problems = validate(g)
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return EXIT_INVALID
    report = {"n_in": g.n_in, "n_out": g.n_out, "degree": g.degree, "edges": g.num_edges,
              "spectral": spectral_gap(g).to_dict()}
    if args.expansion:
        report["expansion"] = vertex_expansion(
            g, args.max_subset_size, mode=args.mode, samples=args.samples, seed=args.seed
        ).to_dict()
    _emit(args, report)
    return EXIT_OK


def cmd_verify(args) -> int:
    seeds = range(args.seeds)
    if args.check == "sensitivity":
        res = suites.verify_sensitivity(args.n, args.degree, args.depth, seeds)
    elif args.check == "mixing":
        res = suites.verify_mixing(args.n, args.degree, args.max_size, seeds)
    elif args.check == "walk":
        res = suites.verify_walk(args.n, args.degree, args.steps, args.threshold, seeds)
    else:
        res = suites.verify_expansion(args.n, args.degree, seeds)
    _emit(args, res.to_dict())
    return EXIT_OK if res.passed else EXIT_INVALID


def cmd_count(args) -> int:
    arch = load_arch(args.arch)
    shape = tuple(args.input_shape)
    params = param_count(arch)
    macs = mac_count(arch, shape)
    layers = [
        {"index": c.index, "type": c.type, "params": c.params, "macs": c.macs,
         "out_shape": list(c.out_shape) if c.out_shape else None}
        for c in layer_costs(arch, shape)
    ]
    report = {"params": params, "params_millions": round(params / 1e6, 3),
              "flops": 2 * macs, "mult_adds": macs, "input_shape": list(shape)}
    if args.layers:
        report["layers"] = layers
    _emit(args, report)
    return EXIT_OK


def _load_data(args, split: str):
    if args.data == "synthetic":
        n = args.train_samples if split == "train" else args.test_samples
        return synthetic_dataset(n, args.classes, tuple(args.image_shape), seed=args.data_seed,
                                 split=split)
    limit = args.train_samples if split == "train" else args.test_samples
    return load_cifar10(args.data, split=split, limit=limit)


def _config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.lr, momentum=args.momentum,
                       weight_decay=args.weight_decay, seed=args.seed,
                       precision=args.precision, augment=args.augment)


def cmd_train(args) -> int:
    arch = load_arch(args.arch)
    train_data, test_data = _load_data(args, "train"), _load_data(args, "test")
    _, hist = train(arch, train_data, _config(args), test_data)
    out = args.out or "metrics.csv"
    write_metrics_csv(hist, out)
    final = hist[-1] if hist else None
    print(json.dumps({"written": out, "params": param_count(arch),
                      "final_test_acc": final.test_acc if final else None}))
    return EXIT_OK


def cmd_compare(args) -> int:
    train_data, test_data = _load_data(args, "train"), _load_data(args, "test")
    spec = SweepSpec(factors=args.factors, kinds=args.kinds.split(","),
                     seeds=list(range(args.seed, args.seed + args.seeds)),
                     config=_config(args), widths=tuple(args.widths))
    rows = run_sweep(spec, train_data, test_data, jobs=args.jobs,
                     progress=lambda r: log.info("factor=%s kind=%s seed=%s acc=%.4f",
                                                 r["factor"], r["kind"], r["graph_seed"],
                                                 r["final_test_acc"]))
    out = args.out or "compare.csv"
    write_compare_csv(rows, out)
    print(json.dumps({"written": out, "rows": len(rows),
                      "summary": summary_rows(rows)}, indent=2, default=str))
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _add_training_flags(p) -> None:
    p.add_argument("--data", default="synthetic",
                   help="'synthetic' or a CIFAR-10 binary directory (default: synthetic)")
    p.add_argument("--train-samples", type=int, default=2000)
    p.add_argument("--test-samples", type=int, default=1000)
    p.add_argument("--classes", type=int, default=10, help="synthetic classes")
    p.add_argument("--image-shape", type=int, nargs=3, default=[3, 32, 32],
                   metavar=("C", "H", "W"), help="synthetic image shape")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--augment", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", "-o", default=None, help="output file")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--precision", choices=("f64", "f32"), default="f64")
    common.add_argument("-v", "--verbose", action="store_true")

    # shared flags live on each subcommand: `xnets gen --seed 7 ...`
    parser = argparse.ArgumentParser(prog="xnets", description="Expander-graph sparse networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a bipartite graph")
    p.add_argument("--type", choices=("random", "cayley", "grouped", "dense"), default="random")
    p.add_argument("--n", type=int, default=64, help="input vertices")
    p.add_argument("--n-out", type=int, default=None, help="output vertices (default: --n)")
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--generators", default=None, help="comma-separated bit strings (cayley)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("measure", parents=[common], help="spectral gap and expansion of a graph")
    p.add_argument("graph")
    p.add_argument("--expansion", action="store_true")
    p.add_argument("--max-subset-size", type=int, default=None)
    p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("verify", parents=[common], help="multi-seed connectivity checks")
    p.add_argument("check", choices=("sensitivity", "mixing", "walk", "expansion"))
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--max-size", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds, 0..N-1")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("count", parents=[common], help="parameter and FLOP counts")
    p.add_argument("--arch", required=True, help="architecture JSON or builtin name")
    p.add_argument("--input-shape", type=int, nargs=3, default=[3, 32, 32])
    p.add_argument("--layers", action="store_true", help="include per-layer costs")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("train", parents=[common], help="train one architecture")
    p.add_argument("--arch", required=True)
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", parents=[common], help="expander vs grouped sweep")
    p.add_argument("--factors", type=_ints, default=[1, 2, 4, 8])
    p.add_argument("--kinds", default="expander,grouped")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--widths", type=int, nargs=4, default=[32, 64, 128, 128])
    _add_training_flags(p)
    p.set_defaults(func=cmd_compare, lr=0.02)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # unknown flags exit 2 via argparse
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DatasetError, OSError) as exc:
        print(f"xnets: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (XNetError, ValueError, KeyError) as exc:
        print(f"xnets: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
