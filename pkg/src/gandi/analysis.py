"""Divergences, numerical checks of the GANDI bounds, and experiment statistics.

The bound checks work on finite supports. ``p_G`` is taken to be the
unnormalised measure ``w_hat * q``, which is the object the bounds are stated
for; normalised divergences are reported alongside for information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

Z95 = float(stats.norm.ppf(0.975))
TOL = 1e-12


def discrete_kl(p, m):
    """``sum_i p_i log(p_i / m_i)`` with ``0 log 0 = 0``.

    ``m`` may be an unnormalised non-negative measure. Returns ``inf`` when
    some ``p_i > 0`` has ``m_i = 0``.
    """
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    if p.shape != m.shape:
        raise ValueError("arguments must have the same shape")
    if np.any(p < 0) or np.any(m < 0):
        raise ValueError("arguments must be non-negative")
    pos = p > 0
    if np.any(m[pos] == 0):
        return math.inf
    return float(np.sum(p[pos] * np.log(p[pos] / m[pos])))


@dataclass
class DiscreteInstance:
    """Target ``p``, proposal ``q`` and estimated weights on a finite support.

    ``epsilon`` defaults to ``max |w_hat - w|`` over the support of ``q``; a
    smaller claimed value can be passed to test precondition checks.
    """

    p: np.ndarray
    q: np.ndarray
    w_hat: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.w_hat = np.asarray(self.w_hat, dtype=float)
        if not (self.p.shape == self.q.shape == self.w_hat.shape) or self.p.ndim != 1:
            raise ValueError("p, q and w_hat must be vectors of one length")
        for name, v in (("p", self.p), ("q", self.q)):
            if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a probability vector")
        if np.any((self.p > 0) & (self.q == 0)):
            raise ValueError("support of p must lie inside the support of q")
        if self.epsilon is None:
            self.epsilon = self.max_error

    @property
    def n(self):
        return len(self.p)

    @property
    def w(self):
        out = np.zeros_like(self.p)
        s = self.q > 0
        out[s] = self.p[s] / self.q[s]
        return out

    @property
    def max_error(self):
        s = self.q > 0
        return float(np.max(np.abs(self.w_hat[s] - self.w[s])))

    @property
    def rho(self):
        s = self.p > 0
        return float(np.max(self.q[s] / self.p[s]))

    @property
    def J(self):
        """Exact weighted squared error ``sum_i q_i (w_hat_i - w_i)^2``."""
        return float(np.sum(self.q * (self.w_hat - self.w) ** 2))

    @property
    def p_g(self):
        return self.w_hat * self.q


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    bound: float
    holds: bool
    # KL with p_G renormalised to sum to one; informational only
    normalized_lhs: float = math.nan


class PreconditionError(ValueError):
    """Instance does not satisfy the assumptions of the bound being checked."""


def _check_j(inst):
    if inst.J > inst.epsilon ** 2 + TOL:
        raise PreconditionError(f"J = {inst.J:.3g} exceeds epsilon^2 = {inst.epsilon ** 2:.3g}")


def theorem1_preconditions(inst):
    _check_j(inst)
    if np.any(inst.w_hat < 0):
        raise PreconditionError("w_hat must be non-negative")
    s = inst.q > 0
    if np.any(inst.w[s] < inst.epsilon - TOL):
        raise PreconditionError("need w >= epsilon on the support of q")
    # margin keeps round-off from admitting epsilon * rho == 1 cases
    if inst.epsilon * inst.rho >= 1.0 - 1e-9:
        raise PreconditionError("need epsilon * rho < 1")


def theorem2_preconditions(inst):
    _check_j(inst)
    if np.any(inst.w_hat < 0):
        raise PreconditionError("w_hat must be non-negative")


def verify_theorem1(inst):
    """``KL(p || w_hat q) <= log(1 / (1 - epsilon rho))``."""
    theorem1_preconditions(inst)
    pg = inst.p_g
    lhs = discrete_kl(inst.p, pg)
    bound = -math.log1p(-inst.epsilon * inst.rho)
    z = pg.sum()
    norm = discrete_kl(inst.p, pg / z) if z > 0 else math.inf
    return BoundCheck(lhs, bound, lhs <= bound + TOL, norm)


def verify_theorem2(inst):
    """``KL(w_hat q || p) <= (1 + epsilon) log(1 + epsilon rho)``."""
    theorem2_preconditions(inst)
    pg = inst.p_g
    lhs = discrete_kl(pg, inst.p)
    bound = (1.0 + inst.epsilon) * math.log1p(inst.epsilon * inst.rho)
    z = pg.sum()
    norm = discrete_kl(pg / z, inst.p) if z > 0 else math.inf
    return BoundCheck(lhs, bound, lhs <= bound + TOL, norm)


def _argmax_loglik(a, b):
    """Maximiser over D in [0, 1] of ``a log D + b log(1 - D)`` by golden section."""
    if a == 0 and b == 0:
        return math.nan
    if b == 0:
        return 1.0
    if a == 0:
        return 0.0

    # work in logit space where the objective is convex and unconstrained
    def neg(t):
        return a * np.logaddexp(0.0, -t) + b * np.logaddexp(0.0, t)

    res = optimize.minimize_scalar(neg, bracket=(-1.0, 1.0), method="golden",
                                   options={"xtol": 1e-12})
    return float(1.0 / (1.0 + math.exp(-res.x)))


def verify_lemma1(inst, pg):
    """Largest gap between numeric and closed-form optimal discriminators."""
    a = inst.p_g
    pg = np.asarray(pg, dtype=float)
    worst = 0.0
    for ai, bi in zip(a, pg):
        if ai + bi == 0:
            continue
        numeric = _argmax_loglik(ai, bi)
        worst = max(worst, abs(numeric - ai / (ai + bi)))
    return worst


def random_instance(rng, kind="theorem1", n=None):
    """Random instance satisfying the preconditions of one of the bounds.

    ``theorem1`` instances have full support and ``epsilon * rho < 1``.
    ``theorem2`` instances may give ``p`` a strict subset of ``q``'s support;
    off that subset ``w_hat`` is 0, matching ``w``.
    """
    n = int(rng.integers(2, 17)) if n is None else n
    if kind == "theorem1":
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        p = np.maximum(p, 1e-6)
        p /= p.sum()
        w = p / q
        rho = float(np.max(q / p))
        cap = min(w.min(), 1.0 / rho)
        eps = rng.uniform(0.0, 0.999) * cap
        w_hat = np.maximum(w + rng.uniform(-eps, eps, n), 0.0)
    elif kind == "theorem2":
        q = rng.dirichlet(np.ones(n))
        k = int(rng.integers(1, n + 1))
        keep = rng.permutation(n)[:k]
        p = np.zeros(n)
        p[keep] = rng.dirichlet(np.ones(k))
        w = np.where(q > 0, p / q, 0.0)
        eps = rng.uniform(0.0, 1.0) * float(w[keep].max())
        w_hat = np.zeros(n)
        w_hat[keep] = np.maximum(w[keep] + rng.uniform(-eps, eps, k), 0.0)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    return DiscreteInstance(p, q, w_hat)


def kde_kl_estimate(samples_a, samples_b, bandwidth=None, grid_size=60):
    """KL between Gaussian KDEs of two 2-D sample sets, evaluated on a grid.

    The grid spans the joint bounding box padded by 10% per side; both
    densities are normalised over the grid before :func:`discrete_kl`.
    """
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if len(a) < 100 or len(b) < 100:
        raise ValueError("need at least 100 samples in each set")
    for s in (a, b):
        if np.all(s == s[0]):
            raise ValueError("samples are all identical; density estimate is degenerate")
    both = np.vstack([a, b])
    lo, hi = both.min(axis=0), both.max(axis=0)
    pad = 0.1 * (hi - lo)
    axes = [np.linspace(l - d, h + d, grid_size) for l, h, d in zip(lo, hi, pad)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.vstack([m.ravel() for m in mesh])
    try:
        da = stats.gaussian_kde(a.T, bw_method=bandwidth)(pts)
        db = stats.gaussian_kde(b.T, bw_method=bandwidth)(pts)
    except np.linalg.LinAlgError as exc:
        raise ValueError("samples are degenerate; density estimate is singular") from exc
    da = np.maximum(da, 1e-300)
    db = np.maximum(db, 1e-300)
    return discrete_kl(da / da.sum(), db / db.sum())


@dataclass(frozen=True)
class SuccessStats:
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float


def wilson_interval(successes, trials, z=Z95):
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # keep exact endpoints at the extremes despite rounding
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return min(lo, phat), max(hi, phat)


def success_stats(outcomes):
    """Success rate with a 95% Wilson score interval."""
    outcomes = [bool(o) for o in outcomes]
    if not outcomes:
        raise ValueError("no outcomes")
    n, s = len(outcomes), sum(outcomes)
    lo, hi = wilson_interval(s, n)
    return SuccessStats(n, s, s / n, lo, hi)


def select_checkpoint(checkpoints, validation_instances, run_trial):
    """Checkpoint with the most validation successes; ties go to the earliest.

    ``run_trial(checkpoint, instance, index)`` returns whether the planner
    solved ``instance``. Returns ``(checkpoint, success_counts)``.
    """
    checkpoints = list(checkpoints)
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    if len(checkpoints) == 1:
        return checkpoints[0], [None]
    counts = [sum(bool(run_trial(ck, inst, i)) for i, inst in enumerate(validation_instances))
              for ck in checkpoints]
    order = sorted(range(len(checkpoints)), key=lambda j: (-counts[j], checkpoints[j].epoch))
    return checkpoints[order[0]], counts


def select_checkpoint_by_density(checkpoints, reference, sample, n=2000):
    """Checkpoint whose samples best match ``reference`` in KDE KL; ties go to the earliest.

    Used where no planner is available to validate against. ``sample(ck, n)``
    draws ``n`` unconditional samples from a checkpoint. Returns
    ``(checkpoint, kl_values)``.
    """
    checkpoints = list(checkpoints)
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    scores = []
    for ck in checkpoints:
        try:
            scores.append(kde_kl_estimate(reference, sample(ck, n)))
        except ValueError:
            # a collapsed generator has no density estimate; never prefer it
            scores.append(math.inf)
    best = min(range(len(checkpoints)), key=lambda j: (scores[j], checkpoints[j].epoch))
    return checkpoints[best], scores


REPORT_COLUMNS = ("instance_id", "suite", "epsilon", "rho", "lhs1", "bound1", "lhs2", "bound2",
                  "holds", "normalized_kl1", "normalized_kl2", "lemma1_max_dev")


def verification_rows(rng, n_instances=1000, extra=()):
    """Run both bound suites plus the discriminator check.

    Each suite draws ``n_instances`` precondition-satisfying instances; an
    ``epsilon = 0`` tightness row is prepended to each. ``extra`` instances are
    checked too; those failing preconditions are marked ``rejected``.
    Returns ``(rows, violations, rejected)``.
    """
    rows, violations, rejected = [], 0, 0
    idx = 0
    for suite in ("theorem1", "theorem2"):
        exact = random_instance(rng, suite)
        exact = DiscreteInstance(exact.p, exact.q, exact.w.copy())
        batch = [exact] + [random_instance(rng, suite) for _ in range(n_instances)]
        for inst in batch:
            row, bad = _verify_one(idx, suite, inst, rng)
            rows.append(row)
            violations += bad
            idx += 1
    for inst in extra:
        row, bad = _verify_one(idx, "injected", inst, rng)
        rejected += row["holds"] == "rejected"
        violations += bad
        rows.append(row)
        idx += 1
    return rows, violations, rejected


def _verify_one(idx, suite, inst, rng):
    row = dict.fromkeys(REPORT_COLUMNS, "")
    row.update(instance_id=idx, suite=suite, epsilon=inst.epsilon, rho=inst.rho)
    try:
        c2 = verify_theorem2(inst)
    except PreconditionError:
        row["holds"] = "rejected"
        return row, 0
    ok = c2.holds
    row.update(lhs2=c2.lhs, bound2=c2.bound, normalized_kl2=c2.normalized_lhs)
    try:
        c1 = verify_theorem1(inst)
        row.update(lhs1=c1.lhs, bound1=c1.bound, normalized_kl1=c1.normalized_lhs)
        ok = ok and c1.holds
    except PreconditionError:
        if suite == "theorem1":
            row["holds"] = "rejected"
            return row, 0
    # discriminator check against a random generator measure
    pg = rng.dirichlet(np.ones(inst.n)) * rng.uniform(0.5, 2.0)
    dev = verify_lemma1(inst, pg)
    row["lemma1_max_dev"] = dev
    ok = ok and dev <= 1e-6
    row["holds"] = "true" if ok else "false"
    return row, int(not ok)
