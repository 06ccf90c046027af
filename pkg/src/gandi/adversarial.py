"""Conditional GAN training and the importance-weighted GANDI pipeline.

Losses follow the usual convention: the discriminator minimises the negative
log-likelihood of labelling real samples 1 and generated samples 0, and the
generator minimises ``-log D(fake)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neuralnet as nn
from .importance import ImportanceConfig, SampleSet, fit_importance
from .resampler import bootstrap, build_plan

LOG_FLOOR = 1e-12


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 500
    lr_d: float = 1e-3
    lr_g: float = 1e-3
    # beta1 = 0.9 oscillates between modes on small mixtures
    beta1: float = 0.5
    checkpoint_every: int = 10
    noise_dim: int = 4
    g_hidden: tuple = (32, 32, 32)
    d_hidden: tuple = (32, 256, 32)

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")


class Generator:
    """Maps (context, noise) to an action in ``action_box``.

    The network works in [-1, 1] coordinates; :meth:`sample` rescales its
    output to the box and clamps.
    """

    def __init__(self, net, noise_dim, context_dim, action_box):
        self.net = net
        self.noise_dim = noise_dim
        self.context_dim = context_dim
        self.action_box = action_box
        self.clamp_events = 0
        self.samples_drawn = 0

    @classmethod
    def create(cls, context_dim, action_box, rng, noise_dim=4, hidden=(32, 32, 32)):
        sizes = [context_dim + noise_dim, *hidden, action_box.dim]
        net = nn.DenseNet(sizes, ["relu"] * len(hidden) + ["linear"], rng=rng)
        return cls(net, noise_dim, context_dim, action_box)

    def copy(self):
        return Generator(self.net.copy(), self.noise_dim, self.context_dim, self.action_box)

    def raw(self, contexts, noise, return_cache=False):
        x = np.hstack([np.asarray(contexts, dtype=float).reshape(len(noise), -1), noise])
        return self.net.forward(x, return_cache=return_cache)

    def sample(self, contexts, rng):
        contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
        if self.context_dim == 0:
            contexts = contexts.reshape(len(contexts), 0)
        z = rng.standard_normal((len(contexts), self.noise_dim))
        out = self.action_box.denormalize(self.raw(contexts, z))
        clipped = self.action_box.clip(out)
        self.clamp_events += int(np.any(clipped != out, axis=1).sum())
        self.samples_drawn += len(out)
        return clipped

    def sample_n(self, n, rng, context=None):
        ctx = np.zeros((n, 0)) if context is None else np.repeat(np.atleast_2d(context), n, axis=0)
        return self.sample(ctx, rng)

    @property
    def clamp_rate(self):
        return self.clamp_events / self.samples_drawn if self.samples_drawn else 0.0


class Discriminator:
    def __init__(self, net, context_dim, action_dim):
        self.net = net
        self.context_dim = context_dim
        self.action_dim = action_dim

    @classmethod
    def create(cls, context_dim, action_dim, rng, hidden=(32, 256, 32)):
        sizes = [context_dim + action_dim, *hidden, 1]
        net = nn.DenseNet(sizes, ["relu"] * len(hidden) + ["sigmoid"], rng=rng)
        return cls(net, context_dim, action_dim)

    def __call__(self, contexts, actions, return_cache=False):
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        x = np.hstack([np.asarray(contexts, dtype=float).reshape(len(actions), -1), actions])
        if return_cache:
            out, cache = self.net.forward(x, return_cache=True)
            return out[:, 0], cache
        return self.net.forward(x)[:, 0]


def discriminator_loss(D, contexts, real_actions, fake_actions):
    """Mean of ``-log D(real) - log(1 - D(fake))`` over real/fake pairs."""
    real_actions = np.atleast_2d(real_actions)
    fake_actions = np.atleast_2d(fake_actions)
    if len(real_actions) != len(fake_actions):
        raise ValueError("discriminator loss needs equal numbers of real and fake samples")
    d_real = np.asarray(D(contexts, real_actions), dtype=float)
    d_fake = np.asarray(D(contexts, fake_actions), dtype=float)
    return float(np.mean(-np.log(np.maximum(d_real, LOG_FLOOR))
                         - np.log(np.maximum(1.0 - d_fake, LOG_FLOOR))))


def generator_loss(D, contexts, fake_actions):
    d_fake = np.asarray(D(contexts, np.atleast_2d(fake_actions)), dtype=float)
    return float(np.mean(-np.log(np.maximum(d_fake, LOG_FLOOR))))


def weighted_discriminator_loss(D, contexts, off_target_actions, weights, fake_actions,
                                fake_contexts=None):
    """Importance-weighted discriminator loss, normalised like the plain one.

    ``sum_i w_i * -log D(a_i) / n + mean(-log(1 - D(fake)))``; with unit weights
    and equal counts this equals :func:`discriminator_loss`.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("importance weights must be non-negative")
    off = np.atleast_2d(off_target_actions)
    fake = np.atleast_2d(fake_actions)
    fake_contexts = contexts if fake_contexts is None else fake_contexts
    d_real = np.asarray(D(contexts, off), dtype=float)
    d_fake = np.asarray(D(fake_contexts, fake), dtype=float)
    real_term = np.sum(w * -np.log(np.maximum(d_real, LOG_FLOOR))) / len(off)
    return float(real_term + np.mean(-np.log(np.maximum(1.0 - d_fake, LOG_FLOOR))))


def optimal_discriminator_value(w_hat_q_density, pg_density):
    """Closed-form optimum ``w q / (w q + p_G)`` of the weighted discriminator."""
    a, b = float(w_hat_q_density), float(pg_density)
    if a < 0 or b < 0:
        raise ValueError("densities must be non-negative")
    if a + b == 0:
        raise ZeroDivisionError("optimal discriminator is undefined when both densities are 0")
    return a / (a + b)


@dataclass
class Checkpoint:
    epoch: int
    generator: Generator


@dataclass
class GanResult:
    generator: Generator
    discriminator: Discriminator
    checkpoints: list = field(default_factory=list)
    curve: list = field(default_factory=list)  # (epoch, d_loss, g_loss)


def train_gan(dataset, config, rng, action_box, context_box=None):
    """Train a conditional GAN on ``dataset`` (a :class:`SampleSet`).

    One discriminator step and one generator step are taken per mini-batch.
    Checkpoints are taken at epoch 0, every ``checkpoint_every`` epochs and at
    the final epoch.
    """
    if len(dataset) < config.batch_size:
        raise ValueError(f"dataset has {len(dataset)} samples, fewer than one batch "
                         f"of {config.batch_size}")
    ctx = dataset.contexts if context_box is None else context_box.normalize(dataset.contexts)
    ctx = ctx.reshape(len(dataset), -1)
    real = action_box.normalize(dataset.actions)
    cdim, adim = ctx.shape[1], real.shape[1]

    G = Generator.create(cdim, action_box, rng, config.noise_dim, config.g_hidden)
    D = Discriminator.create(cdim, adim, rng, config.d_hidden)
    opt_g = nn.OptimizerState.adam(G.net, lr=config.lr_g, beta1=config.beta1)
    opt_d = nn.OptimizerState.adam(D.net, lr=config.lr_d, beta1=config.beta1)
    result = GanResult(G, D, [Checkpoint(0, G.copy())])

    n, bs = len(real), config.batch_size
    n_batches = n // bs
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        d_sum = g_sum = 0.0
        for b in range(n_batches):
            idx = order[b * bs:(b + 1) * bs]
            c = ctx[idx]
            # discriminator step on equal numbers of real and generated samples
            z = rng.standard_normal((bs, config.noise_dim))
            fake = G.raw(c, z)
            d_real, cache_r = D(c, real[idx], return_cache=True)
            d_fake, cache_f = D(c, fake, return_cache=True)
            pr = np.maximum(d_real, LOG_FLOOR)
            pf = np.maximum(1.0 - d_fake, LOG_FLOOR)
            d_sum += float(np.mean(-np.log(pr) - np.log(pf)))
            gr, _ = D.net.backward(cache_r, (-1.0 / pr / bs)[:, None])
            gf, _ = D.net.backward(cache_f, (1.0 / pf / bs)[:, None])
            nn.adam_step(D.net, [a + b_ for a, b_ in zip(gr, gf)], opt_d)

            # generator step: minimise -log D(G(c, z))
            z = rng.standard_normal((bs, config.noise_dim))
            fake, cache_g = G.raw(c, z, return_cache=True)
            d_fake, cache_f = D(c, fake, return_cache=True)
            pf = np.maximum(d_fake, LOG_FLOOR)
            g_sum += float(np.mean(-np.log(pf)))
            _, dx = D.net.backward(cache_f, (-1.0 / pf / bs)[:, None])
            gg, _ = G.net.backward(cache_g, dx[:, cdim:])
            nn.adam_step(G.net, gg, opt_g)
        if not (G.net.all_finite() and D.net.all_finite()):
            raise FloatingPointError(f"GAN parameters became non-finite at epoch {epoch}")
        result.curve.append((epoch, d_sum / max(n_batches, 1), g_sum / max(n_batches, 1)))
        if epoch % config.checkpoint_every == 0 or epoch == config.max_epochs:
            result.checkpoints.append(Checkpoint(epoch, G.copy()))
    return result


@dataclass
class GandiResult:
    gan: GanResult
    importance: object
    plan: object
    bootstrapped: SampleSet

    @property
    def generator(self):
        return self.gan.generator


def gandi(on_target, off_target, config, rng, action_box, context_box=None,
          importance_config=None, bootstrap_size=None):
    """Fit importance weights, bootstrap the merged data, then train a GAN on it."""
    if len(on_target) == 0:
        raise ValueError("GANDI needs at least one on-target sample")
    if len(off_target) == 0:
        raise ValueError("GANDI needs at least one off-target sample")
    importance_config = importance_config or ImportanceConfig()
    fit = fit_importance(on_target, off_target, importance_config, rng,
                         context_box=context_box, action_box=action_box)
    merged = on_target.concat(off_target)
    plan = build_plan(merged, fit.model)
    resampled = bootstrap(plan, bootstrap_size or len(merged), rng)
    gan = train_gan(resampled, config, rng, action_box, context_box)
    return GandiResult(gan, fit, plan, resampled)


def sample_action(G, context, rng):
    """Draw one action for ``context``."""
    ctx = np.asarray(context, dtype=float).reshape(1, -1)
    return G.sample(ctx, rng)[0]
