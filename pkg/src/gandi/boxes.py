"""Axis-aligned boxes and the [-1, 1] scaling used at network boundaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    low: tuple
    high: tuple

    def __post_init__(self):
        low = tuple(float(v) for v in self.low)
        high = tuple(float(v) for v in self.high)
        if len(low) != len(high) or any(h <= l for l, h in zip(low, high)):
            raise ValueError(f"degenerate box {low} .. {high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self):
        return len(self.low)

    @property
    def lo(self):
        return np.array(self.low)

    @property
    def hi(self):
        return np.array(self.high)

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0

    def denormalize(self, u):
        u = np.asarray(u, dtype=float)
        return self.lo + (u + 1.0) * 0.5 * (self.hi - self.lo)

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def uniform(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))
