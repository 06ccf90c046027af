"""Two-dimensional Gaussian-mixture toy problem.

The target ``p`` has isotropic components at (1, 1) and (3, 1); the behaviour
distribution ``q`` adds a third component at (2, 2) and uses a wider variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..boxes import Box


@dataclass(frozen=True)
class GmmSpec:
    means: tuple
    variance: float
    weights: tuple = None

    def __post_init__(self):
        if self.weights is None:
            k = len(self.means)
            object.__setattr__(self, "weights", tuple([1.0 / k] * k))

    def density(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        d2 = ((pts[:, None, :] - mu[None, :, :]) ** 2).sum(axis=-1)
        comp = np.exp(-0.5 * d2 / self.variance) / (2.0 * np.pi * self.variance)
        out = comp @ np.asarray(self.weights)
        return out if np.ndim(points) > 1 else float(out[0])

    def sample(self, rng, n):
        idx = rng.choice(len(self.means), size=n, p=self.weights)
        mu = np.asarray(self.means, dtype=float)[idx]
        return mu + np.sqrt(self.variance) * rng.standard_normal((n, 2))

    def mean(self):
        return np.asarray(self.weights) @ np.asarray(self.means, dtype=float)


P_SPEC = GmmSpec(means=((1.0, 1.0), (3.0, 1.0)), variance=0.05)
Q_SPEC = GmmSpec(means=((1.0, 1.0), (3.0, 1.0), (2.0, 2.0)), variance=0.1)

# sample box for generator output; covers q beyond 4 standard deviations
TOY_BOX = Box((-1.0, -1.0), (5.0, 3.5))


def gmm_density_p(point):
    return P_SPEC.density(point)


def gmm_density_q(point):
    return Q_SPEC.density(point)


def gmm_sample_p(rng, n=None):
    if n is None:
        return P_SPEC.sample(rng, 1)[0]
    return P_SPEC.sample(rng, n)


def gmm_sample_q(rng, n=None):
    if n is None:
        return Q_SPEC.sample(rng, 1)[0]
    return Q_SPEC.sample(rng, n)


def density_ratio(points):
    """Exact ``p/q`` at each point."""
    return P_SPEC.density(points) / Q_SPEC.density(points)


def grid(box=TOY_BOX, n=60):
    xs = np.linspace(box.low[0], box.high[0], n)
    ys = np.linspace(box.low[1], box.high[1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])
