"""Command-line entry point.

    gandi collect --config run.cfg
    gandi train   --config run.cfg --method gandi
    gandi eval    --config run.cfg
    gandi verify  --out runs/verify
    gandi toy     --seed 3

Exit status: 0 success, 1 usage error, 2 bound violation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import ExperimentConfig, RunFailure, UsageError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="gandi", description="GANDI action-sampler experiments")
    p.add_argument("verb", choices=["collect", "train", "eval", "verify", "toy"])
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--method", choices=["gan", "gandi"], help="sampler to train")
    p.add_argument("--domain", choices=["gmm", "binpack", "reconfig"])
    return p


def load_config(args):
    overrides = {"seed": args.seed, "out": args.out, "domain": args.domain}
    if args.verb == "toy" and args.domain is None:
        overrides["domain"] = "gmm"
    if args.config:
        return ExperimentConfig.load(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def run(argv=None):
    args = build_parser().parse_args(argv)
    config = load_config(args)
    if args.verb == "collect":
        harness.cmd_collect(config)
    elif args.verb == "train":
        if args.method is None:
            raise UsageError("train needs --method {gan,gandi}")
        harness.cmd_train(config, args.method)
    elif args.verb == "eval":
        harness.cmd_eval(config)
    elif args.verb == "verify":
        path, violations, rejected = harness.cmd_verify(config)
        print(f"report: {path}; violations: {violations}; rejected: {rejected}")
        if violations:
            return EXIT_VERIFY
    elif args.verb == "toy":
        paths, result = harness.cmd_toy(config)
        print(f"spearman(w_hat, p/q) = {result.spearman:.3f}; selected epoch "
              f"{result.selected_epoch}; wrote {len(paths)} files")
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except UsageError as exc:
        print(f"gandi: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunFailure, ValueError, FloatingPointError, OSError) as exc:
        print(f"gandi: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
