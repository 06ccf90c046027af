"""Experiment driver: collection, training, evaluation, bound checks and the toy run.

Every random draw comes from a stream derived from ``(seed, stage tag, index)``
so outputs are byte-identical across reruns. Output CSVs start with a
``# config_hash=...`` comment followed by the header row.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from . import neuralnet as nn
from .adversarial import Generator, TrainConfig, gandi, train_gan
from .analysis import (DiscreteInstance, REPORT_COLUMNS, select_checkpoint,
                       select_checkpoint_by_density, success_stats, verification_rows)
from .domains import gmm
from .domains.binpack import BinPackDomain
from .domains.reconfig import ReconfigDomain
from .importance import ImportanceConfig, SampleSet
from .planner import LearnedSampler, SearchBudget, UniformSampler, extract_experience, search


class UsageError(ValueError):
    """Bad configuration or arguments (exit status 1)."""


class RunFailure(RuntimeError):
    """The experiment could not be carried out (exit status 3)."""


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _tags(text):
    return tuple(t for t in text.replace(",", " ").split())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    """Flat ``key = value`` configuration; see README for the schema."""

    domain: str = "binpack"
    seed: int = 0
    out: str = "runs"
    episodes: tuple = (20,)
    samplers: tuple = ("uniform", "gan", "gandi")
    collect_budget: int = 200
    max_collect_attempts: int = 1000
    budget: int = 20
    k: int = 3
    path_cost_weight: float = 0.0
    test_instances: int = 100
    validation_instances: int = 10
    epochs: int = 500
    checkpoint_every: int = 10
    batch_size: int = 32
    noise_dim: int = 4
    importance_epochs: int = 500
    importance_validation: float = 0.2
    bootstrap_size: int = 0  # 0 means |A_p| + |A_q|
    progress_feature: bool = False
    verify_instances: int = 1000
    toy_on: int = 200
    toy_off: int = 2000
    toy_generated: int = 10000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.domain not in ("gmm", "binpack", "reconfig"):
            raise UsageError(f"unknown domain {self.domain!r}")
        bad = [t for t in self.samplers if t not in ("uniform", "gan", "gandi")]
        if bad:
            raise UsageError(f"unknown sampler tags {bad}")
        if not self.episodes or min(self.episodes) < 1:
            raise UsageError("episode counts must be at least 1")
        for name in ("collect_budget", "max_collect_attempts", "budget", "k", "test_instances",
                     "validation_instances", "epochs", "checkpoint_every", "batch_size",
                     "noise_dim", "importance_epochs", "verify_instances", "toy_on", "toy_off",
                     "toy_generated"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1")
        if self.bootstrap_size < 0:
            raise UsageError("bootstrap_size must be non-negative")
        if not 0.0 <= self.path_cost_weight <= 1.0:
            raise UsageError("path_cost_weight must lie in [0, 1]")
        if not 0.0 <= self.importance_validation < 1.0:
            raise UsageError("importance_validation must lie in [0, 1)")

    _parsers = {"episodes": _ints, "samplers": _tags, "progress_feature": _bool}

    @classmethod
    def parse(cls, text, **overrides):
        values = {}
        known = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise UsageError(f"line {lineno}: unknown key {key!r}")
            values[key] = cls._convert(key, value, known[key], lineno)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def _convert(cls, key, value, f, lineno):
        try:
            if key in cls._parsers:
                return cls._parsers[key](value)
            kind = type(f.default)
            return kind(value) if kind is not str else value
        except ValueError as exc:
            raise UsageError(f"line {lineno}: bad value for {key}: {exc}") from None

    @classmethod
    def load(cls, path, **overrides):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, **overrides)

    def canonical(self):
        lines = []
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def train_config(self):
        return TrainConfig(batch_size=self.batch_size, max_epochs=self.epochs,
                           checkpoint_every=self.checkpoint_every, noise_dim=self.noise_dim)

    def importance_config(self):
        return ImportanceConfig(epochs=self.importance_epochs,
                                validation_fraction=self.importance_validation)


def stream(seed, tag, index=0):
    """Independent generator for trial ``index`` of stage ``tag``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(tag.encode()),
                                                         int(index)]))


def make_domain(config):
    if config.domain == "binpack":
        return BinPackDomain(progress=config.progress_feature)
    if config.domain == "reconfig":
        return ReconfigDomain()
    raise UsageError(f"{config.domain!r} is not a planning domain")


# ---------------------------------------------------------------- file helpers

def fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, config, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in ([r[h] for h in header] if isinstance(r, dict) else r)])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise RunFailure(f"missing file {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    stage: str
    config_hash: str
    version: str = __version__
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def write(self, out):
        out = Path(out)
        path = out / f"manifest_{self.stage}.json"
        body = {"stage": self.stage, "config_hash": self.config_hash, "version": self.version,
                "inputs": dict(sorted(self.inputs.items())),
                "outputs": dict(sorted(self.outputs.items()))}
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _manifest(stage, config, out, inputs=(), outputs=()):
    out = Path(out)
    m = RunManifest(stage, config.config_hash)
    for p in inputs:
        m.inputs[Path(p).relative_to(out).as_posix()] = digest(p)
    for p in outputs:
        m.outputs[Path(p).relative_to(out).as_posix()] = digest(p)
    return m.write(out)


# ---------------------------------------------------------------- collect

def data_paths(out):
    d = Path(out) / "data"
    return d / "on_target.csv", d / "off_target.csv", d / "episodes.csv"


def collect_episodes(config, domain, n_episodes):
    """Uniform-sampler planning episodes; only solved ones are kept."""
    sampler = UniformSampler(domain)
    budget = SearchBudget(config.collect_budget)
    episodes = []
    for attempt in range(config.max_collect_attempts):
        if len(episodes) == n_episodes:
            break
        state = domain.sample_instance(stream(config.seed, "collect-instance", attempt))
        result = search(state, domain, config.k, domain.heuristic, sampler, budget,
                        stream(config.seed, "collect-search", attempt), config.path_cost_weight)
        if result.solved:
            episodes.append((attempt, state, result))
    if not episodes:
        raise RunFailure(f"no episode solved within collect_budget={config.collect_budget} "
                         f"expansions over {config.max_collect_attempts} attempts; "
                         "increase collect_budget")
    if len(episodes) < n_episodes:
        raise RunFailure(f"only {len(episodes)} of {n_episodes} episodes solved in "
                         f"{config.max_collect_attempts} attempts; increase collect_budget "
                         "or max_collect_attempts")
    return episodes


def cmd_collect(config):
    out = Path(config.out)
    on_path, off_path, ep_path = data_paths(out)
    if config.domain == "gmm":
        on = gmm.gmm_sample_p(stream(config.seed, "toy-on"), config.toy_on)
        off = gmm.gmm_sample_q(stream(config.seed, "toy-off"), config.toy_off)
        header = ["episode", "x", "y"]
        write_csv(on_path, config, header, [(0, *a) for a in on])
        write_csv(off_path, config, header, [(0, *a) for a in off])
        write_csv(ep_path, config, ["episode", "on_target", "off_target"],
                  [(0, len(on), len(off))])
        _manifest("collect", config, out, outputs=(on_path, off_path, ep_path))
        return on_path, off_path, ep_path

    domain = make_domain(config)
    episodes = collect_episodes(config, domain, max(config.episodes))
    header = ["episode", *domain.context_columns, *domain.action_columns]
    on_rows, off_rows, meta = [], [], []
    for e, (attempt, state, result) in enumerate(episodes):
        exp = extract_experience(result)
        for s, a in zip(exp.on_states, exp.on_actions):
            on_rows.append((e, *domain.featurize(s), *a))
        for s, a in zip(exp.off_states, exp.off_actions):
            off_rows.append((e, *domain.featurize(s), *a))
        rec = domain.instance_record(state)
        meta.append({"episode": e, "attempt": attempt, **rec,
                     "plan_length": len(result.plan), "on_target": len(exp.on_actions),
                     "off_target": len(exp.off_actions), "expansions": result.expansions})
    meta_header = ["episode", "attempt", *domain.instance_columns, "plan_length", "on_target",
                   "off_target", "expansions"]
    write_csv(on_path, config, header, on_rows)
    write_csv(off_path, config, header, off_rows)
    write_csv(ep_path, config, meta_header, meta)
    _manifest("collect", config, out, outputs=(on_path, off_path, ep_path))
    return on_path, off_path, ep_path


def load_dataset(config, max_episode=None):
    """``(A_p, A_q)`` as :class:`SampleSet` with actions in the learned frame."""
    on_path, off_path, _ = data_paths(config.out)
    sets = []
    for path in (on_path, off_path):
        rows = read_csv(path)
        if max_episode is not None:
            rows = [r for r in rows if int(r["episode"]) < max_episode]
        domain = None if config.domain == "gmm" else make_domain(config)
        ctx_cols = [] if domain is None else list(domain.context_columns)
        act_cols = ["x", "y"] if domain is None else list(domain.action_columns)
        ctx = np.array([[float(r[c]) for c in ctx_cols] for r in rows]).reshape(len(rows), -1)
        act = np.array([[float(r[c]) for c in act_cols] for r in rows]).reshape(len(rows), -1)
        if domain is not None and len(rows):
            act = domain.to_learned(ctx, act)
        elif domain is not None:
            act = np.zeros((0, len(domain.learned_columns)))
        sets.append(SampleSet(ctx, act))
    return sets[0], sets[1]


# ---------------------------------------------------------------- train

def model_path(out, method, episodes):
    return Path(out) / "models" / f"{method}_ep{episodes}.model"


def action_box_for(config):
    return gmm.TOY_BOX if config.domain == "gmm" else make_domain(config).learned_box


def load_generator(config, path):
    path = Path(path)
    if not path.exists():
        raise RunFailure(f"missing model {path}")
    net = nn.load_model(path)
    box = action_box_for(config)
    ctx_dim = net.layer_sizes[0] - config.noise_dim
    if ctx_dim < 0:
        raise RunFailure(f"model {path} does not match noise_dim={config.noise_dim}")
    return Generator(net, config.noise_dim, ctx_dim, box)


def plan_once(config, domain, sampler, state, rng):
    return search(state, domain, config.k, domain.heuristic, sampler,
                  SearchBudget(config.budget), rng, config.path_cost_weight).solved


def select_toy_checkpoint(config, result, reference):
    """Checkpoint closest in KDE KL to the samples it was trained on."""
    def sample(ck, n):
        return ck.generator.sample_n(n, stream(config.seed, "toy-select"))
    return select_checkpoint_by_density(result.checkpoints, reference, sample)


def train_method(config, method, n_episodes):
    """Train one sampler on the first ``n_episodes`` episodes.

    Returns ``(selected checkpoint, GanResult, extras, scores)`` where
    ``extras`` holds the importance fit for GANDI and ``scores`` the per-checkpoint
    validation successes (planning domains) or KDE KL values (mixture toy).
    """
    on, off = load_dataset(config, n_episodes if config.domain != "gmm" else None)
    box = action_box_for(config)
    rng = stream(config.seed, f"train/{method}/{n_episodes}")
    tcfg = config.train_config()
    if method == "gan":
        if len(on) < tcfg.batch_size:
            raise RunFailure(f"A_p has {len(on)} samples, fewer than one batch")
        result, extra = train_gan(on, tcfg, rng, box), None
    elif method == "gandi":
        if len(on) == 0:
            raise RunFailure("GANDI needs on-target samples")
        size = config.bootstrap_size or None
        extra = gandi(on, off, tcfg, rng, box, importance_config=config.importance_config(),
                      bootstrap_size=size)
        result = extra.gan
    else:
        raise UsageError(f"unknown method {method!r}")

    if config.domain == "gmm":
        # no planner to validate against; match the generator's own training set
        reference = on.actions if extra is None else extra.bootstrapped.actions
        best, scores = select_toy_checkpoint(config, result, reference)
        return best, result, extra, scores
    domain = make_domain(config)
    val = [domain.sample_instance(stream(config.seed, "validation-instance", i))
           for i in range(config.validation_instances)]

    def trial(ck, state, i):
        return plan_once(config, domain, LearnedSampler(domain, ck.generator), state,
                         stream(config.seed, "validation-search", i))

    best, counts = select_checkpoint(result.checkpoints, val, trial)
    return best, result, extra, counts


def cmd_train(config, method):
    out = Path(config.out)
    on_path, off_path, ep_path = data_paths(out)
    written = []
    for m in config.episodes:
        best, result, extra, counts = train_method(config, method, m)
        mp = model_path(out, method, m)
        mp.parent.mkdir(parents=True, exist_ok=True)
        nn.save_model(best.generator.net, mp)
        curve = write_csv(mp.with_name(f"{method}_ep{m}_curve.csv"), config,
                          ["epoch", "d_loss", "g_loss"], result.curve)
        sel = write_csv(mp.with_name(f"{method}_ep{m}_selection.csv"), config,
                        ["epoch", "validation_kl" if config.domain == "gmm"
                         else "validation_successes", "selected"],
                        [(ck.epoch, "" if c is None else c, ck is best)
                         for ck, c in zip(result.checkpoints, counts or [None] * len(result.checkpoints))])
        written += [mp, curve, sel]
        if extra is not None:
            written.append(write_csv(mp.with_name(f"{method}_ep{m}_importance.csv"), config,
                                     ["epoch", "objective"],
                                     list(enumerate(extra.importance.curve))))
    _manifest(f"train_{method}", config, out, inputs=(on_path, off_path, ep_path),
              outputs=written)
    return written


# ---------------------------------------------------------------- eval

EVAL_HEADER = ["sampler", "episodes", "trials", "successes", "rate", "ci_low", "ci_high"]


def evaluate_sampler(config, domain, sampler, tag):
    outcomes = []
    for i in range(config.test_instances):
        state = domain.sample_instance(stream(config.seed, "test-instance", i))
        outcomes.append(plan_once(config, domain, sampler, state,
                                  stream(config.seed, f"eval/{tag}", i)))
    return success_stats(outcomes)


def cmd_eval(config):
    out = Path(config.out)
    domain = make_domain(config)
    rows, inputs = [], []
    uniform = None
    for m in config.episodes:
        for tag in config.samplers:
            if tag == "uniform":
                # the uniform sampler ignores training data; evaluate once
                if uniform is None:
                    uniform = evaluate_sampler(config, domain, UniformSampler(domain), "uniform")
                st = uniform
            else:
                mp = model_path(out, tag, m)
                gen = load_generator(config, mp)
                inputs.append(mp)
                st = evaluate_sampler(config, domain, LearnedSampler(domain, gen), f"{tag}/{m}")
            rows.append((tag, m, st.trials, st.successes, st.rate, st.ci_low, st.ci_high))
    path = write_csv(out / "results" / "eval.csv", config, EVAL_HEADER, rows)
    _manifest("eval", config, out, inputs=inputs, outputs=(path,))
    return path, rows


# ---------------------------------------------------------------- verify

def faulty_instance():
    """Weights whose error exceeds the claimed epsilon; must be rejected."""
    p = np.array([0.5, 0.5])
    return DiscreteInstance(p, p, np.array([1.5, 0.5]), epsilon=0.1)


def cmd_verify(config, extra=()):
    out = Path(config.out)
    rows, violations, rejected = verification_rows(stream(config.seed, "verify"),
                                                   config.verify_instances,
                                                   extra=(faulty_instance(), *extra))
    path = write_csv(out / "verify" / "report.csv", config, list(REPORT_COLUMNS), rows)
    _manifest("verify", config, out, outputs=(path,))
    return path, violations, rejected


# ---------------------------------------------------------------- toy

@dataclass
class ToyResult:
    on: np.ndarray
    off: np.ndarray
    weights: np.ndarray  # clamped w_hat at the off-target points
    bootstrapped: np.ndarray
    generated: np.ndarray
    spearman: float
    gandi: object
    selected_epoch: int


def grid_histogram(points, box=gmm.TOY_BOX, bins=30):
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=bins,
                             range=[[box.low[0], box.high[0]], [box.low[1], box.high[1]]])
    return h.ravel() / max(h.sum(), 1)


def grid_mass(density, box=gmm.TOY_BOX, bins=30, sub=4):
    """Probability of each histogram cell under ``density`` by midpoint quadrature."""
    n = bins * sub
    xs = box.low[0] + (np.arange(n) + 0.5) * (box.high[0] - box.low[0]) / n
    ys = box.low[1] + (np.arange(n) + 0.5) * (box.high[1] - box.low[1]) / n
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    d = density(np.column_stack([gx.ravel(), gy.ravel()])).reshape(bins, sub, bins, sub)
    m = d.sum(axis=(1, 3)).ravel()
    return m / m.sum()


def total_variation(a, b):
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def run_toy(config):
    on = gmm.gmm_sample_p(stream(config.seed, "toy-on"), config.toy_on)
    off = gmm.gmm_sample_q(stream(config.seed, "toy-off"), config.toy_off)
    rng = stream(config.seed, "toy-train")
    res = gandi(SampleSet.unconditional(on), SampleSet.unconditional(off), config.train_config(),
                rng, gmm.TOY_BOX, importance_config=config.importance_config(),
                bootstrap_size=config.bootstrap_size or None)
    model = res.importance.model
    probe = gmm.gmm_sample_q(stream(config.seed, "toy-probe"), 1000)
    rho = spearmanr(model.raw(np.zeros((1000, 0)), probe), gmm.density_ratio(probe)).correlation
    best, _ = select_toy_checkpoint(config, res.gan, res.bootstrapped.actions)
    gen = best.generator.sample_n(config.toy_generated, stream(config.seed, "toy-generate"))
    return ToyResult(on, off, model.weights(SampleSet.unconditional(off)),
                     res.bootstrapped.actions, gen, float(rho), res, best.epoch)


def cmd_toy(config):
    out = Path(config.out) / "toy"
    r = run_toy(config)
    pts = gmm.grid(gmm.TOY_BOX, 60)
    paths = [
        write_csv(out / "densities.csv", config, ["x", "y", "p", "q"],
                  np.column_stack([pts, gmm.gmm_density_p(pts), gmm.gmm_density_q(pts)])),
        write_csv(out / "samples.csv", config, ["set", "x", "y"],
                  [("on_target", *a) for a in r.on] + [("off_target", *a) for a in r.off]),
        write_csv(out / "weighted.csv", config, ["x", "y", "w_hat", "w_true"],
                  np.column_stack([r.off, r.weights, gmm.density_ratio(r.off)])),
        write_csv(out / "bootstrap.csv", config, ["x", "y"], r.bootstrapped),
        write_csv(out / "generator.csv", config, ["x", "y"], r.generated),
    ]
    _manifest("toy", config, Path(config.out), outputs=paths)
    return paths, r


__all__ = ["ExperimentConfig", "RunManifest", "UsageError", "RunFailure", "stream",
           "cmd_collect", "cmd_train", "cmd_eval", "cmd_verify", "cmd_toy", "run_toy",
           "load_dataset", "load_generator", "train_method", "evaluate_sampler",
           "grid_histogram", "grid_mass", "total_variation"]
