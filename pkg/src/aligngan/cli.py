"""Command-line front door: train, sample, eval, gradcheck, show-font.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from . import datasets, evaluation, experiments, gradcheck, pgm
from .config import ConfigError, load_config, serialize_config
from .networks import BuildError
from .training import TrainingError

log = logging.getLogger("aligngan")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("ALIGNGAN_LOG", "quiet"),
                                         logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")


def _build_parser() -> _Parser:
    parser = _Parser(prog="aligngan",
                     description="desk-scale cross-domain GAN laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training experiment")
    p.add_argument("--config", required=True)

    p = sub.add_parser("sample", help="emit a P5 grid of aligned sample pairs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compute an alignment metric")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transform", default="negation",
                   choices=("negation", "edge", "identity"))
    p.add_argument("--log", dest="log_path", default=None,
                   help="append the report row to this JSON-lines file")

    p = sub.add_parser("gradcheck", help="run the gradient oracle suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--self-test-corrupt", action="store_true",
                   help=argparse.SUPPRESS)

    sub.add_parser("show-font", help="print the built-in glyph font")
    return parser


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(cfg.out_dir, exist_ok=True)
    result = experiments.run_experiment(cfg)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w") as fh:
        fh.write(serialize_config(cfg))
    with open(os.path.join(cfg.out_dir, "metrics.jsonl"), "w") as fh:
        fh.write(result.metrics_jsonl())
    for step, blob in result.checkpoints:
        with open(os.path.join(cfg.out_dir, f"checkpoint_{step:06d}.agck"),
                  "wb") as fh:
            fh.write(blob)
    log.info("wrote %d checkpoints and %d metric rows to %s",
             len(result.checkpoints), len(result.metrics), cfg.out_dir)
    return EXIT_OK


def cmd_sample(args) -> int:
    gen, _, _ = ckpt.load(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    n = args.rows * args.cols
    z = rng.uniform(-1.0, 1.0, size=(n, gen.spec.noise_dim))
    a, b = evaluation.aligned_pairs(gen, z)
    grid = pgm.pair_grid(a, b, args.rows, args.cols)
    with open(args.out, "wb") as fh:
        fh.write(pgm.to_bytes(grid))
    return EXIT_OK


_TRANSFORMS = {
    "negation": np.negative,
    "edge": datasets.make_edge,
    "identity": lambda a: a,
}

METRICS = ("negation_consistency", "alignment_correlation",
           "label_propagation_accuracy")


def cmd_eval(args) -> int:
    if args.metric not in METRICS:
        raise UsageError(f"unknown metric {args.metric!r}; choose from {METRICS}")
    gen, _, meta = ckpt.load(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    if args.metric == "label_propagation_accuracy":
        class_count = gen.spec.label_count
        if class_count < 1:
            raise UsageError("checkpoint has no label conditioning")
        eval_x, eval_l = experiments.eval_glyph_target_data(
            args.seed, class_count, jitter=0.1)
        value = evaluation.label_propagation_accuracy(
            gen, eval_x, eval_l, class_count,
            per_class_count=math.ceil(args.n / class_count), seed=args.seed)
        count = math.ceil(args.n / class_count) * class_count
    else:
        z = rng.uniform(-1.0, 1.0, size=(args.n, gen.spec.noise_dim))
        pairs = evaluation.aligned_pairs(gen, z)
        if args.metric == "negation_consistency":
            value = evaluation.negation_consistency(pairs)
        else:
            value = evaluation.alignment_correlation(
                pairs, _TRANSFORMS[args.transform])
        count = args.n
    report = evaluation.EvalReport(args.metric, value, count, args.seed,
                                   checkpoint_id=meta.get("step"))
    row = json.dumps(report.to_dict(), sort_keys=True)
    print(row)
    if args.log_path:
        with open(args.log_path, "a") as fh:
            fh.write(row + "\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    ok = gradcheck.run(seed=args.seed, corrupt=args.self_test_corrupt)
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_show_font(_args) -> int:
    for digit in range(10):
        print(f"glyph {digit}:")
        print(datasets.font_ascii(digit))
        print()
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "show-font": cmd_show_font,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (TrainingError, ckpt.CheckpointError, datasets.FormatError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ConfigError, BuildError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
