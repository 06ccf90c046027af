"""Direct least-squares estimation of the importance ratio ``p/q``.

The estimate minimises the sample objective

    J_hat(w) = sum_{a in A_q} w(a)^2 - 2 * sum_{a in A_p} w(a)

and is clamped at zero when queried. Two backends are provided: a lookup
table over discrete keys (closed-form minimiser per key) and a dense network
trained with Adadelta.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import neuralnet as nn


@dataclass
class SampleSet:
    """Contexts and actions as parallel row arrays."""

    contexts: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        ctx = np.asarray(self.contexts, dtype=float)
        if ctx.size == 0:
            width = ctx.shape[1] if ctx.ndim == 2 else 0
            ctx = np.zeros((len(self.actions), width))
        self.contexts = ctx.reshape(len(self.actions), ctx.shape[1] if ctx.ndim == 2 else -1)

    def __len__(self):
        return len(self.actions)

    @classmethod
    def unconditional(cls, actions):
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        return cls(np.zeros((len(actions), 0)), actions)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        return cls(np.array([r.context for r in records], dtype=float),
                   np.array([r.action for r in records], dtype=float))

    def concat(self, other):
        return SampleSet(np.vstack([self.contexts, other.contexts]),
                         np.vstack([self.actions, other.actions]))

    def take(self, idx):
        return SampleSet(self.contexts[idx], self.actions[idx])


@dataclass(frozen=True)
class LabeledSample:
    context: tuple
    action: tuple
    label: str  # "on_target" | "off_target"


@dataclass
class ImportanceConfig:
    backend: str = "network"
    epochs: int = 500
    batch_size: int = 32
    lr: float = 1.0
    hidden: tuple = (32, 32, 32)
    bins: int = 20
    # share of each set held out to pick the best epoch; 0 trains on everything
    validation_fraction: float = 0.2


class NotFittedError(RuntimeError):
    pass


class TabularImportance:
    """Importance weights looked up by a discrete key.

    Keys seen only on-target get ``n_p`` (the denominator is floored at one);
    unseen keys get 0.
    """

    backend = "tabular"

    def __init__(self, table, key_fn=None):
        self.table = dict(table)
        self.key_fn = key_fn

    def key(self, context, action):
        if self.key_fn is None:
            return tuple(np.asarray(action).tolist()) if isinstance(action, np.ndarray) else action
        return self.key_fn(context, action)

    def raw(self, contexts, actions):
        return np.array([self.table.get(self.key(c, a), 0.0)
                         for c, a in zip(contexts, actions)], dtype=float)

    def weights(self, samples):
        return np.maximum(self.raw(samples.contexts, samples.actions), 0.0)

    def dump(self):
        lines = ["tabular"]
        for k in sorted(self.table, key=repr):
            lines.append(f"{k!r}\t{self.table[k]!r}")
        return "\n".join(lines) + "\n"


def grid_key_fn(box, bins=20, context_box=None, context_bins=None):
    """Discretise actions (and optionally contexts) onto a regular grid."""
    lo, hi = box.lo, box.hi

    def key(context, action):
        u = (np.asarray(action, dtype=float) - lo) / (hi - lo)
        cell = tuple(np.clip((u * bins).astype(int), 0, bins - 1).tolist())
        if context_box is None:
            return cell
        cu = (np.asarray(context, dtype=float) - context_box.lo) / (context_box.hi - context_box.lo)
        cb = context_bins or bins
        return tuple(np.clip((cu * cb).astype(int), 0, cb - 1).tolist()) + cell

    return key


def fit_tabular(on_keys, off_keys):
    """Per-key closed form ``n_p(key) / n_q(key)`` over the union of keys."""
    n_p = Counter(on_keys)
    n_q = Counter(off_keys)
    return {k: n_p.get(k, 0) / max(n_q.get(k, 0), 1) for k in set(n_p) | set(n_q)}


class NetworkImportance:
    """Dense network with linear output; negative outputs are clamped to 0."""

    backend = "network"

    def __init__(self, net, context_box=None, action_box=None):
        self.net = net
        self.context_box = context_box
        self.action_box = action_box

    def inputs(self, contexts, actions):
        return _network_inputs(contexts, actions, self.context_box, self.action_box)

    def raw(self, contexts, actions):
        return self.net.forward(self.inputs(contexts, actions))[:, 0]

    def weights(self, samples):
        return np.maximum(self.raw(samples.contexts, samples.actions), 0.0)

    def dump(self):
        return "network\n" + nn.format_model(self.net)


def _network_inputs(contexts, actions, context_box, action_box):
    contexts = np.asarray(contexts, dtype=float)
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    if context_box is not None:
        contexts = context_box.normalize(contexts)
    if action_box is not None:
        actions = action_box.normalize(actions)
    return np.hstack([contexts.reshape(len(actions), -1), actions])


def weight(model, context, action):
    """Clamped importance weight of one (context, action) pair."""
    if model is None:
        raise NotFittedError("importance model has not been fitted")
    ctx = np.atleast_2d(np.asarray(context, dtype=float))
    if model.backend == "tabular":
        return float(max(model.table.get(model.key(context, action), 0.0), 0.0))
    return float(max(model.raw(ctx, np.atleast_2d(action))[0], 0.0))


def empirical_J(model, on_target, off_target):
    """``sum_q w^2 - 2 sum_p w`` with clamped weights."""
    wq = model.weights(off_target)
    wp = model.weights(on_target)
    return float(np.sum(wq ** 2) - 2.0 * np.sum(wp))


@dataclass
class ImportanceFit:
    model: object
    curve: list = field(default_factory=list)  # empirical J after each epoch
    best_epoch: int = 0


def fit_importance(on_target, off_target, config=None, rng=None,
                   context_box=None, action_box=None, key_fn=None):
    """Fit ``w_hat`` on on-target and off-target sample sets.

    Returns an :class:`ImportanceFit`; its ``curve`` holds the empirical
    objective before training and after every epoch (network backend only).
    """
    config = config or ImportanceConfig()
    if len(on_target) == 0 or len(off_target) == 0:
        raise ValueError("importance fitting needs non-empty on- and off-target sets")
    if on_target.contexts.shape[1] != off_target.contexts.shape[1] or \
            on_target.actions.shape[1] != off_target.actions.shape[1]:
        raise ValueError("on- and off-target samples have different dimensions")

    if config.backend == "tabular":
        key_fn = key_fn or (grid_key_fn(action_box, config.bins) if action_box is not None else None)
        model = TabularImportance({}, key_fn)
        on_keys = [model.key(c, tuple(a)) for c, a in zip(on_target.contexts, on_target.actions)]
        off_keys = [model.key(c, tuple(a)) for c, a in zip(off_target.contexts, off_target.actions)]
        model.table = fit_tabular(on_keys, off_keys)
        return ImportanceFit(model)

    if rng is None:
        raise ValueError("network importance fitting needs an rng")
    train_p, val_p = _split(on_target, config.validation_fraction, rng)
    train_q, val_q = _split(off_target, config.validation_fraction, rng)
    merged = train_p.concat(train_q)
    x = _network_inputs(merged.contexts, merged.actions, context_box, action_box)
    is_on = np.concatenate([np.ones(len(train_p), bool), np.zeros(len(train_q), bool)])
    sizes = [x.shape[1], *config.hidden, 1]
    net = nn.DenseNet(sizes, ["relu"] * len(config.hidden) + ["linear"], rng=rng)
    model = NetworkImportance(net, context_box, action_box)
    opt = nn.OptimizerState.adadelta(net, lr=config.lr)
    fit = ImportanceFit(model, [empirical_J(model, on_target, off_target)])

    # held-out objective on the same per-sample scale as the training objective
    ratio = len(off_target) / len(on_target)

    def held_out():
        if len(val_p) == 0 or len(val_q) == 0:
            return -np.inf
        return ratio * np.mean(model.weights(val_q) ** 2) - 2.0 * np.mean(model.weights(val_p))

    best = (held_out(), 0, net.copy())
    n = len(x)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            out, cache = net.forward(x[idx], return_cache=True)
            w = out[:, 0]
            # d/dw of (sum_q w^2 - 2 sum_p w) / batch
            g = np.where(is_on[idx], -2.0, 2.0 * w) / len(idx)
            grads, _ = net.backward(cache, g[:, None])
            nn.adadelta_step(net, grads, opt)
        if not net.all_finite():
            raise FloatingPointError("importance network diverged")
        score = held_out()
        if score < best[0]:
            best = (score, epoch, net.copy())
        fit.curve.append(empirical_J(model, on_target, off_target))
    if np.isfinite(best[0]):
        model.net = best[2]
        fit.best_epoch = best[1]
    else:
        fit.best_epoch = config.epochs
    return fit


def _split(samples, fraction, rng):
    """Random (train, validation) split; tiny sets are not split."""
    n_val = int(round(fraction * len(samples)))
    if n_val == 0 or n_val == len(samples):
        return samples, samples.take(np.zeros(0, dtype=int))
    order = rng.permutation(len(samples))
    return samples.take(np.sort(order[n_val:])), samples.take(np.sort(order[:n_val]))
