"""Uniform vs GAN vs GANDI samplers for bin packing through one entry point.

Runs the full collect / train / eval pipeline from a config file and prints
the success table with 95% Wilson intervals.

    python3 demos/binpack_comparison.py [--config configs/binpack.cfg] [--out DIR]
"""

import argparse
from pathlib import Path

from gandi import harness
from gandi.harness import ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "binpack.cfg"))
    ap.add_argument("--out", default="runs/demo_binpack")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    config = ExperimentConfig.load(args.config, out=args.out, seed=args.seed)
    harness.cmd_collect(config)
    meta = harness.read_csv(Path(config.out) / "data" / "episodes.csv")
    n_on = sum(int(r["on_target"]) for r in meta)
    n_off = sum(int(r["off_target"]) for r in meta)
    print(f"collected {len(meta)} episodes: {n_on} on-target, {n_off} off-target samples")

    for method in ("gan", "gandi"):
        harness.cmd_train(config, method)
    _, rows = harness.cmd_eval(config)

    print(f"{'sampler':>8} {'episodes':>8} {'rate':>6}  95% CI")
    for tag, m, n, s, rate, lo, hi in rows:
        print(f"{tag:>8} {m:>8} {rate:6.3f}  [{lo:.3f}, {hi:.3f}]  ({s}/{n})")


if __name__ == "__main__":
    main()
