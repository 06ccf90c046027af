"""Where do learned samplers put obstacles in the reconfiguration domain?

A good placement clears the corridor in front of the target. This script
trains GAN and GANDI on collected episodes and reports, for each sampler,
the share of placements that land in that corridor, next to the share in the
training data itself.

    python3 demos/reconfig_placements.py [--config configs/reconfig.cfg] [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from gandi import harness
from gandi.domains import reconfig
from gandi.harness import ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def front_share(config, domain, draw, n_instances=100, per_instance=100):
    rng = harness.stream(config.seed, "placement-check")
    hits = 0
    for i in range(n_instances):
        state = domain.sample_instance(harness.stream(config.seed, "test-instance", i))
        actions = draw(state, rng, per_instance)
        hits += int(reconfig.in_front_of_target(state, actions[:, 1:]).sum())
    return hits / (n_instances * per_instance)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "reconfig.cfg"))
    ap.add_argument("--out", default="runs/demo_reconfig")
    args = ap.parse_args()

    config = ExperimentConfig.load(args.config, out=args.out)
    m = max(config.episodes)
    harness.cmd_collect(config)
    for method in ("gan", "gandi"):
        harness.cmd_train(config, method)
    domain = harness.make_domain(config)

    # share of recorded placements in front of the target of their own episode
    meta = {r["episode"]: r for r in harness.read_csv(Path(config.out) / "data" / "episodes.csv")}
    for name in ("on_target", "off_target"):
        rows = harness.read_csv(Path(config.out) / "data" / f"{name}.csv")
        front = [reconfig.in_front_of_target(domain.instance_from_record(meta[r["episode"]]),
                                             [[float(r["x"]), float(r["y"])]])[0] for r in rows]
        print(f"{name:>10} data: {np.mean(front):.3f} in front of target ({len(rows)} samples)")

    print(f"{'uniform':>10}: {front_share(config, domain, domain.uniform_actions):.3f}")
    for method in ("gan", "gandi"):
        gen = harness.load_generator(config, harness.model_path(config.out, method, m))

        def draw(state, rng, k, gen=gen):
            ctx = np.tile(domain.featurize(state), (k, 1))
            return domain.compose_actions(state, gen.sample(ctx, rng), rng)

        print(f"{method:>10}: {front_share(config, domain, draw):.3f}")


if __name__ == "__main__":
    main()
