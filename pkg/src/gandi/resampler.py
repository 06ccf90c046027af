"""Bootstrap resampling proportional to importance weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateWeightsError(ValueError):
    """Every weight is zero, so there is nothing to resample."""


@dataclass
class BootstrapPlan:
    probabilities: np.ndarray
    effective_sample_size: float
    source: object = None

    def __len__(self):
        return len(self.probabilities)


def plan_from_weights(weights, source=None):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("bootstrap weights must be finite and non-negative")
    c = float(w.sum())
    if c <= 0.0:
        raise DegenerateWeightsError("all importance weights are zero; cannot bootstrap")
    return BootstrapPlan(w / c, c, source)


def build_plan(samples, model):
    """Resampling distribution over ``samples`` with ``p_w(a) = w(a) / sum(w)``."""
    return plan_from_weights(model.weights(samples), samples)


def draw_indices(plan, n, rng):
    """Inverse-CDF draws; index ``i`` is chosen when ``cdf[i-1] <= u < cdf[i]``."""
    if n == 0:
        return np.zeros(0, dtype=int)
    # zero-probability entries are dropped so rounding in the cumsum can never select them
    support = np.flatnonzero(plan.probabilities > 0)
    cdf = np.cumsum(plan.probabilities[support])
    cdf[-1] = 1.0
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return support[np.minimum(idx, len(cdf) - 1)]


def bootstrap(plan, n=None, rng=None):
    """Draw ``n`` samples with replacement (default: as many as the source).

    Returns a subset of ``plan.source`` when it supports ``take``; otherwise
    the drawn indices.
    """
    if n is None:
        n = len(plan)
    idx = draw_indices(plan, n, rng)
    if plan.source is not None and hasattr(plan.source, "take"):
        return plan.source.take(idx)
    return idx
