"""Numerical check of the KL bounds on finite supports.

Walks through two hand-sized examples where the bounds are tight, then runs
randomized suites and the optimal-discriminator check.

    python3 demos/verify_bounds.py [--instances N]
"""

import argparse

import numpy as np

from gandi.analysis import (DiscreteInstance, PreconditionError, verification_rows,
                            verify_theorem1, verify_theorem2)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--instances", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    u = np.full(4, 0.25)
    # uniform weights off by 0.1 everywhere; both bounds hold with equality
    low = verify_theorem1(DiscreteInstance(u, u, np.full(4, 0.9)))
    high = verify_theorem2(DiscreteInstance(u, u, np.full(4, 1.1)))
    print(f"KL(p || w_hat q), w_hat = 0.9: {low.lhs:.6f} <= {low.bound:.6f}")
    print(f"KL(w_hat q || p), w_hat = 1.1: {high.lhs:.6f} <= {high.bound:.6f}")

    # an understated epsilon is caught before any bound is evaluated
    bad = DiscreteInstance([0.5, 0.5], [0.5, 0.5], [1.5, 0.5], epsilon=0.1)
    try:
        verify_theorem2(bad)
    except PreconditionError as exc:
        print(f"understated epsilon rejected: {exc}")

    rows, violations, _ = verification_rows(np.random.default_rng(args.seed), args.instances)
    for suite in ("theorem1", "theorem2"):
        sub = [r for r in rows if r["suite"] == suite]
        key = "1" if suite == "theorem1" else "2"
        slack = min(float(r["bound" + key]) - float(r["lhs" + key]) for r in sub)
        print(f"{suite}: {len(sub)} instances, smallest slack {slack:.2e}")
    dev = max(float(r["lemma1_max_dev"]) for r in rows)
    print(f"optimal discriminator: max |numeric - closed form| = {dev:.1e}")
    print(f"violations: {violations}")


if __name__ == "__main__":
    main()
