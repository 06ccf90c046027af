"""Bin packing through a single entry point.

The bin is 0.3 m deep (x) and 1.0 m long (y) and open along its x = 0 edge.
A fixed arm carries each square in a straight line from just outside the
middle of the opening, ``(-size/2, 0.5)``, to its placement. A placement is
legal if the square ends inside the bin and its swept path crosses no placed
square. Objects never move, so squares dropped near the front middle early on
cut off the rest of the bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..boxes import Box
from .geometry import segment_hits_squares

BIN_DEPTH = 0.3
BIN_LENGTH = 1.0
N_OBJ_RANGE = (5, 8)
SIZE_RANGE = (0.05, 0.11)

BIN_BOX = Box((0.0, 0.0), (BIN_DEPTH, BIN_LENGTH))


class InfeasibleAction(ValueError):
    pass


@dataclass(frozen=True)
class BinPackState:
    n_obj: int
    size: float
    placed: tuple = field(default=())

    @property
    def omega(self):
        return (self.n_obj, self.size)


def action_box(state):
    h = 0.5 * state.size
    return Box((h, h), (BIN_DEPTH - h, BIN_LENGTH - h))


def entry_point(state):
    return (-0.5 * state.size, 0.5 * BIN_LENGTH)


def binpack_feasible(state, action):
    x, y = float(action[0]), float(action[1])
    s = state.size
    h = 0.5 * s
    if x - h < -1e-12 or x + h > BIN_DEPTH + 1e-12 or y - h < -1e-12 or y + h > BIN_LENGTH + 1e-12:
        return False
    if not state.placed:
        return True
    # moving square meets a placed one iff its centre path enters the
    # placed square grown by h on every side
    return not bool(segment_hits_squares(entry_point(state), (x, y), state.placed, s).any())


def binpack_transition(state, action):
    if not binpack_feasible(state, action):
        raise InfeasibleAction(f"cannot place at {tuple(action)}")
    return BinPackState(state.n_obj, state.size,
                        state.placed + ((float(action[0]), float(action[1])),))


def binpack_goal(state):
    return len(state.placed) == state.n_obj


def objects_remaining(state):
    return state.n_obj - len(state.placed)


def sample_instance(rng):
    n_obj = int(rng.integers(N_OBJ_RANGE[0], N_OBJ_RANGE[1] + 1))
    size = float(rng.uniform(*SIZE_RANGE))
    return BinPackState(n_obj, size)


def featurize(state):
    """``(n_obj, size)`` scaled to [-1, 1]; independent of the placed poses."""
    lo = np.array([N_OBJ_RANGE[0], SIZE_RANGE[0]])
    hi = np.array([N_OBJ_RANGE[1], SIZE_RANGE[1]])
    raw = np.array([state.n_obj, state.size], dtype=float)
    return 2.0 * (raw - lo) / (hi - lo) - 1.0


def featurize_progress(state):
    """:func:`featurize` plus the number of objects still to place."""
    rem = 2.0 * (objects_remaining(state) - 1.0) / (N_OBJ_RANGE[1] - 1.0) - 1.0
    return np.append(featurize(state), rem)


class BinPackDomain:
    """Bin packing domain; ``progress=True`` adds objects-remaining to the context."""

    name = "binpack"
    action_dim = 2
    # action columns produced by a learned sampler
    learned_columns = (0, 1)
    learned_box = BIN_BOX

    sample_instance = staticmethod(sample_instance)
    feasible = staticmethod(binpack_feasible)
    transition = staticmethod(binpack_transition)
    is_goal = staticmethod(binpack_goal)
    heuristic = staticmethod(objects_remaining)
    action_box = staticmethod(action_box)

    def __init__(self, progress=False):
        self.progress = bool(progress)
        self.context_dim = 3 if self.progress else 2
        self.context_columns = ("ctx_n_obj", "ctx_size") + (("ctx_remaining",) if self.progress else ())

    def featurize(self, state):
        return featurize_progress(state) if self.progress else featurize(state)

    def uniform_actions(self, state, rng, k):
        return action_box(state).uniform(rng, k)

    def to_learned(self, contexts, actions):
        return np.atleast_2d(actions)[:, list(self.learned_columns)]

    def compose_actions(self, state, learned, rng):
        return action_box(state).clip(learned)

    def instance_record(self, state):
        return {"n_obj": state.n_obj, "object_size": repr(state.size)}

    def instance_from_record(self, rec):
        return BinPackState(int(rec["n_obj"]), float(rec["object_size"]))

    instance_columns = ("n_obj", "object_size")
    action_columns = ("x", "y")

    def check_state(self, state):
        """Type invariants: containment and pairwise non-overlap."""
        s, h = state.size, 0.5 * state.size
        p = np.asarray(state.placed).reshape(-1, 2)
        if len(p) > state.n_obj:
            return False
        if np.any(p[:, 0] - h < -1e-9) or np.any(p[:, 0] + h > BIN_DEPTH + 1e-9):
            return False
        if np.any(p[:, 1] - h < -1e-9) or np.any(p[:, 1] + h > BIN_LENGTH + 1e-9):
            return False
        for i in range(len(p)):
            d = np.abs(p[i + 1:] - p[i])
            if np.any((d[:, 0] < s - 1e-12) & (d[:, 1] < s - 1e-12)):
                return False
        return True
