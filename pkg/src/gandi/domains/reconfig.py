"""Reconfiguring movable obstacles so a target at the back can be reached.

The bin is 0.4 m deep (x, opening at x = 0) and 0.7 m wide (y). The 0.07 m
target sits against the back wall; five 0.05 m obstacles are scattered in the
bin. An object can be picked or placed only if its access corridor, inflated
by a gripper clearance, is free of every other object. The goal is a free
corridor to the target.

Actions are ``(object_index, x, y)`` with the index stored as a float. Learned
samplers produce only the placement; the object index is drawn uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..boxes import Box
from .geometry import any_square_hits, corridor, rects_intersect, square

BIN_DEPTH = 0.4
BIN_WIDTH = 0.7
N_OBSTACLES = 5
OBSTACLE_SIZE = 0.05
TARGET_SIZE = 0.07
CLEARANCE = 0.005

BIN_BOX = Box((0.0, 0.0), (BIN_DEPTH, BIN_WIDTH))
PLACEMENT_BOX = Box((OBSTACLE_SIZE / 2, OBSTACLE_SIZE / 2),
                    (BIN_DEPTH - OBSTACLE_SIZE / 2, BIN_WIDTH - OBSTACLE_SIZE / 2))
TARGET_X = BIN_DEPTH - TARGET_SIZE / 2


class InfeasibleMove(ValueError):
    pass


@dataclass(frozen=True)
class ReconfigState:
    target: tuple
    obstacles: tuple


def target_corridor(state):
    return corridor(state.target, TARGET_SIZE, CLEARANCE)


def blocking_obstacles(state):
    rect = target_corridor(state)
    return [i for i, c in enumerate(state.obstacles)
            if rects_intersect(rect, square(c, OBSTACLE_SIZE))]


def reconfig_goal(state):
    return not any_square_hits(target_corridor(state), state.obstacles, OBSTACLE_SIZE)


def _others(state, skip):
    return [c for j, c in enumerate(state.obstacles) if j != skip]


def _clear_of(rect, state, skip):
    if any_square_hits(rect, _others(state, skip), OBSTACLE_SIZE):
        return False
    return not rects_intersect(rect, square(state.target, TARGET_SIZE))


def reconfig_feasible(state, action):
    idx = int(round(float(action[0])))
    if idx < 0 or idx >= len(state.obstacles):
        return False
    new = (float(action[1]), float(action[2]))
    if not PLACEMENT_BOX.contains(new, tol=1e-12):
        return False
    # pick: current corridor must be free of everything else
    if not _clear_of(corridor(state.obstacles[idx], OBSTACLE_SIZE, CLEARANCE), state, idx):
        return False
    # place: footprint and corridor at the new pose
    if not _clear_of(square(new, OBSTACLE_SIZE), state, idx):
        return False
    return _clear_of(corridor(new, OBSTACLE_SIZE, CLEARANCE), state, idx)


def reconfig_transition(state, action):
    if not reconfig_feasible(state, action):
        raise InfeasibleMove(f"cannot apply move {tuple(action)}")
    idx = int(round(float(action[0])))
    obstacles = list(state.obstacles)
    obstacles[idx] = (float(action[1]), float(action[2]))
    return ReconfigState(state.target, tuple(obstacles))


def reconfig_actions(state, rng, k):
    """``k`` uniform moves: object index uniform, placement uniform in the bin."""
    idx = rng.integers(0, len(state.obstacles), size=k).astype(float)
    xy = PLACEMENT_BOX.uniform(rng, k)
    return np.column_stack([idx, xy])


def sample_instance(rng, require_blocked=True, max_tries=10_000):
    """Random target on the back wall plus non-overlapping obstacles.

    With ``require_blocked`` the draw is repeated until at least one obstacle
    blocks the target, so every episode needs at least one move.
    """
    for _ in range(max_tries):
        ty = float(rng.uniform(TARGET_SIZE / 2, BIN_WIDTH - TARGET_SIZE / 2))
        target = (TARGET_X, ty)
        obstacles = []
        while len(obstacles) < N_OBSTACLES:
            c = tuple(float(v) for v in PLACEMENT_BOX.uniform(rng, 1)[0])
            if rects_intersect(square(c, OBSTACLE_SIZE), square(target, TARGET_SIZE)):
                continue
            if any_square_hits(square(c, OBSTACLE_SIZE), obstacles, OBSTACLE_SIZE):
                continue
            obstacles.append(c)
        state = ReconfigState(target, tuple(obstacles))
        if not require_blocked or not reconfig_goal(state):
            return state
    raise RuntimeError("could not sample a blocked reconfiguration instance")


def featurize(state):
    """Obstacle poses in index order, then the target pose, scaled to [-1, 1]."""
    poses = np.array(list(state.obstacles) + [state.target], dtype=float)
    return BIN_BOX.normalize(poses).ravel()


def in_front_of_target(state, placements, size=OBSTACLE_SIZE):
    """Mask of placements whose footprint meets the target's access corridor."""
    rect = target_corridor(state)
    c = np.atleast_2d(np.asarray(placements, dtype=float))
    h = 0.5 * size
    return ((c[:, 0] - h < rect[1]) & (rect[0] < c[:, 0] + h)
            & (c[:, 1] - h < rect[3]) & (rect[2] < c[:, 1] + h))


class ReconfigDomain:
    name = "reconfig"
    action_dim = 3
    context_dim = 2 * (N_OBSTACLES + 1)
    learned_columns = (1, 2)
    learned_box = PLACEMENT_BOX

    sample_instance = staticmethod(sample_instance)
    feasible = staticmethod(reconfig_feasible)
    transition = staticmethod(reconfig_transition)
    is_goal = staticmethod(reconfig_goal)
    featurize = staticmethod(featurize)

    @staticmethod
    def heuristic(state):
        return float(len(blocking_obstacles(state)))

    def uniform_actions(self, state, rng, k):
        return reconfig_actions(state, rng, k)

    def to_learned(self, contexts, actions):
        """The part of full actions a learned sampler produces."""
        return np.atleast_2d(actions)[:, list(self.learned_columns)]

    def compose_actions(self, state, learned, rng):
        learned = PLACEMENT_BOX.clip(np.atleast_2d(learned))
        idx = rng.integers(0, len(state.obstacles), size=len(learned)).astype(float)
        return np.column_stack([idx, learned])

    instance_columns = tuple(
        [f"obs{i}_{a}" for i in range(N_OBSTACLES) for a in ("x", "y")] + ["target_x", "target_y"])
    context_columns = tuple(f"ctx_{c}" for c in instance_columns)
    action_columns = ("object", "x", "y")

    def instance_record(self, state):
        rec = {}
        for i, (x, y) in enumerate(state.obstacles):
            rec[f"obs{i}_x"], rec[f"obs{i}_y"] = repr(x), repr(y)
        rec["target_x"], rec["target_y"] = repr(state.target[0]), repr(state.target[1])
        return rec

    def instance_from_record(self, rec):
        obstacles = tuple((float(rec[f"obs{i}_x"]), float(rec[f"obs{i}_y"]))
                          for i in range(N_OBSTACLES))
        return ReconfigState((float(rec["target_x"]), float(rec["target_y"])), obstacles)

    def check_state(self, state):
        t = square(state.target, TARGET_SIZE)
        if not BIN_BOX.contains([t[0], t[2]], 1e-9) or not BIN_BOX.contains([t[1], t[3]], 1e-9):
            return False
        for i, c in enumerate(state.obstacles):
            if not PLACEMENT_BOX.contains(c, 1e-9):
                return False
            r = square(c, OBSTACLE_SIZE)
            if rects_intersect(r, t):
                return False
            if any_square_hits(r, state.obstacles[i + 1:], OBSTACLE_SIZE):
                return False
        return True
