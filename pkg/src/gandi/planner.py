"""Greedy best-first search over sampled continuous actions.

Each expansion pops the node with the smallest ordering key, draws ``k``
actions from a sampler, pushes a child for every feasible one and then pushes
the popped node back (reconsideration) so it can be sampled again later.
Equal keys are served first-in first-out.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SearchNode:
    state: object
    parent: "SearchNode | None" = None
    action_in: np.ndarray | None = None
    depth: int = 0
    h_value: float = 0.0
    node_id: int = 0


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int | None = None
    max_wall_seconds: float | None = None

    def __post_init__(self):
        if self.max_expansions is None and self.max_wall_seconds is None:
            raise ValueError("a search budget needs at least one limit")
        if self.max_expansions is not None and self.max_expansions < 0:
            raise ValueError("max_expansions must be non-negative")


@dataclass(frozen=True)
class TreeRecord:
    """One sampled action: where it was tried and what it produced."""

    parent_id: int
    state: object
    action: np.ndarray
    feasible: bool
    child_id: int | None


@dataclass
class SearchResult:
    outcome: str
    plan: list = field(default_factory=list)  # [(state, action)]
    expansions: int = 0
    tree: list = field(default_factory=list)  # [TreeRecord]
    goal_node: SearchNode | None = None

    @property
    def solved(self):
        return self.outcome == "solved"


def greedy_heuristic_with_weight(h, path_cost_weight):
    """Return ``key(node) = (1 - w) * h(state) + w * depth``.

    ``w = 0`` is pure greedy search on ``h``; ``w = 1`` orders by depth.
    """
    w = float(path_cost_weight)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"path cost weight must lie in [0, 1], got {w}")

    def key(node):
        return (1.0 - w) * h(node.state) + w * node.depth

    return key


def _plan_from(node):
    plan = []
    while node.parent is not None:
        plan.append((node.parent.state, node.action_in))
        node = node.parent
    plan.reverse()
    return plan


def search(initial_state, domain, k, heuristic, sampler, budget, rng,
           path_cost_weight=0.0, trace=None):
    """Run best-first search from ``initial_state``.

    ``heuristic`` maps a state to a float; ``sampler(state, rng, k)`` returns a
    ``(k, action_dim)`` array. ``trace``, if a list, receives the ordering key
    of every popped node together with the keys still queued.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    key_fn = greedy_heuristic_with_weight(heuristic, path_cost_weight)
    counter = itertools.count()
    ids = itertools.count()
    root = SearchNode(initial_state, h_value=heuristic(initial_state), node_id=next(ids))
    queue = [(key_fn(root), next(counter), root)]
    result = SearchResult("budget_exhausted")
    start = time.perf_counter()

    while queue:
        key, _, node = heapq.heappop(queue)
        if trace is not None:
            trace.append((key, [entry[0] for entry in queue]))
        if domain.is_goal(node.state):
            result.outcome = "solved"
            result.plan = _plan_from(node)
            result.goal_node = node
            return result
        if budget.max_expansions is not None and result.expansions >= budget.max_expansions:
            break
        if budget.max_wall_seconds is not None and time.perf_counter() - start >= budget.max_wall_seconds:
            break
        result.expansions += 1
        actions = np.asarray(sampler(node.state, rng, k), dtype=float)
        for a in actions:
            if domain.feasible(node.state, a):
                child_state = domain.transition(node.state, a)
                child = SearchNode(child_state, node, a, node.depth + 1,
                                   heuristic(child_state), next(ids))
                heapq.heappush(queue, (key_fn(child), next(counter), child))
                result.tree.append(TreeRecord(node.node_id, node.state, a, True, child.node_id))
            else:
                result.tree.append(TreeRecord(node.node_id, node.state, a, False, None))
        # reconsideration
        heapq.heappush(queue, (key, next(counter), node))
    return result


@dataclass
class Experience:
    """(context, action) pairs split by whether they lie on the solution."""

    on_states: list
    on_actions: np.ndarray
    off_states: list
    off_actions: np.ndarray


def extract_experience(result):
    """Split a solved search tree into on-target and off-target samples.

    Only feasible samples are kept; infeasible ones never produced a state.
    """
    if not result.solved:
        raise ValueError("experience can only be extracted from a solved search")
    on_ids = set()
    node = result.goal_node
    while node is not None and node.parent is not None:
        on_ids.add(node.node_id)
        node = node.parent
    on_s, on_a, off_s, off_a = [], [], [], []
    for rec in result.tree:
        if not rec.feasible:
            continue
        if rec.child_id in on_ids:
            on_s.append(rec.state)
            on_a.append(rec.action)
        else:
            off_s.append(rec.state)
            off_a.append(rec.action)
    width = len(result.tree[0].action) if result.tree else 0
    return Experience(on_s, np.array(on_a, dtype=float).reshape(-1, width),
                      off_s, np.array(off_a, dtype=float).reshape(-1, width))


class UniformSampler:
    """Uniform draws from the domain's per-state action box."""

    def __init__(self, domain):
        self.domain = domain

    def __call__(self, state, rng, k):
        return self.domain.uniform_actions(state, rng, k)


class LearnedSampler:
    """Draws placements from a trained generator conditioned on state features."""

    def __init__(self, domain, generator):
        self.domain = domain
        self.generator = generator

    def __call__(self, state, rng, k):
        ctx = np.repeat(self.domain.featurize(state)[None, :], k, axis=0)
        learned = self.generator.sample(ctx, rng)
        return self.domain.compose_actions(state, learned, rng)


def uniform_sampler(domain, state, rng, k=1):
    return domain.uniform_actions(state, rng, k)


def replay(domain, initial_state, plan_actions):
    state = initial_state
    for a in plan_actions:
        state = domain.transition(state, a)
    return state
