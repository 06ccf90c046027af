import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gandi.domains import BinPackDomain, BinPackState, ReconfigDomain, ReconfigState, get_domain
from gandi.domains import binpack, gmm, reconfig
from gandi.domains.geometry import corridor, square
from gandi.planner import SearchBudget, UniformSampler, search
from oracles import linf_segment_clearance, raster_rects_meet, rect_margin

# ---------------------------------------------------------------- mixture


def test_mixture_densities():
    assert gmm.gmm_density_p([2.0, 2.0]) < 0.05 * gmm.gmm_density_q([2.0, 2.0])
    assert gmm.gmm_density_p([1.0, 1.0]) == gmm.gmm_density_p([3.0, 1.0])


def test_mixture_sample_mean():
    s = gmm.gmm_sample_p(np.random.default_rng(0), 100_000)
    assert np.all(np.abs(s.mean(axis=0) - [2.0, 1.0]) <= 0.02)
    assert gmm.gmm_sample_q(np.random.default_rng(0)).shape == (2,)


@pytest.mark.parametrize("density", [gmm.gmm_density_p, gmm.gmm_density_q])
def test_mixture_integrates_to_one(density):
    n = 600
    xs = np.linspace(-2.0, 6.0, n + 1)
    ys = np.linspace(-2.0, 5.0, n + 1)
    cx, cy = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    mass = density(np.column_stack([gx.ravel(), gy.ravel()])).sum() * (xs[1] - xs[0]) * (ys[1] - ys[0])
    assert abs(mass - 1.0) <= 1e-3


# ---------------------------------------------------------------- bin packing


def test_first_placement_feasible():
    s = BinPackState(5, 0.11)
    assert binpack.binpack_feasible(s, (0.2, 0.3))
    assert binpack.binpack_feasible(s, (0.055, 0.945))


def test_overlap_infeasible():
    s = BinPackState(5, 0.1, ((0.2, 0.5),))
    assert not binpack.binpack_feasible(s, (0.22, 0.53))


def test_blocked_path_infeasible():
    s = BinPackState(5, 0.1, ((0.05, 0.5),))
    assert not binpack.binpack_feasible(s, (0.2, 0.5))
    assert binpack.binpack_feasible(BinPackState(5, 0.1, ((0.25, 0.9),)), (0.2, 0.5))


def test_outside_bin_infeasible():
    assert not binpack.binpack_feasible(BinPackState(5, 0.1), (0.28, 0.5))


def test_outside_in_row_solves_large_squares():
    d = BinPackDomain()
    s = BinPackState(5, 0.11)
    for a in [(0.245, 0.06), (0.245, 0.94), (0.245, 0.28), (0.245, 0.72), (0.245, 0.5)]:
        s = d.transition(s, np.array(a))
    assert d.is_goal(s) and d.check_state(s)


def test_goal_and_transition_errors():
    s = BinPackState(5, 0.08)
    assert not binpack.binpack_goal(s)
    with pytest.raises(binpack.InfeasibleAction):
        binpack.binpack_transition(BinPackState(5, 0.1, ((0.05, 0.5),)), (0.2, 0.5))


def test_squares_across_entry_are_a_dead_end():
    s = BinPackState(5, 0.11, ((0.055, 0.445), (0.055, 0.555)))
    entry = binpack.entry_point(s)
    half = s.size
    # exhaustive 1 mm grid over every legal centre: nothing is placeable
    xs = np.arange(0.055, 0.2451, 0.001)
    ys = np.arange(0.055, 0.9451, 0.001)
    assert not any(binpack.binpack_feasible(s, (x, y)) for x in xs for y in ys)
    # independent check on a coarser grid: every path comes within one side of a square
    for x in xs[::10]:
        for y in ys[::10]:
            gap = min(linf_segment_clearance(entry, (x, y), c) for c in s.placed)
            assert gap < half


def test_binpack_feasibility_matches_path_oracle():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(10_000):
        size = rng.uniform(*binpack.SIZE_RANGE)
        placed = tuple(map(tuple, binpack.action_box(BinPackState(5, size)).uniform(rng, 3)))
        state = BinPackState(8, size, placed)
        a = binpack.action_box(state).uniform(rng, 1)[0]
        entry = binpack.entry_point(state)
        gaps = [linf_segment_clearance(entry, a, c) - size for c in placed]
        # skip pairs within the oracle's sampling resolution of a touch
        if min(abs(g) for g in gaps) < 1e-3:
            continue
        assert binpack.binpack_feasible(state, a) == (min(gaps) > 0)
        checked += 1
    assert checked > 9000


def test_binpack_instance_ranges():
    rng = np.random.default_rng(1)
    inst = [binpack.sample_instance(rng) for _ in range(2000)]
    assert {s.n_obj for s in inst} == {5, 6, 7, 8}
    sizes = np.array([s.size for s in inst])
    assert sizes.min() >= 0.05 and sizes.max() <= 0.11
    assert sizes.min() < 0.052 and sizes.max() > 0.108


def test_binpack_uniform_sampler():
    d = BinPackDomain()
    s = BinPackState(6, 0.08)
    a = d.uniform_actions(s, np.random.default_rng(2), 100_000)
    box = binpack.action_box(s)
    assert np.all(box.contains(a))
    centre, span = 0.5 * (box.lo + box.hi), box.hi - box.lo
    assert np.all(np.abs(a.mean(axis=0) - centre) <= 0.01 * span)
    for i in range(2):
        assert stats.kstest((a[:, i] - box.lo[i]) / span[i], "uniform").pvalue > 0.01


def test_binpack_features():
    s = BinPackState(5, 0.11)
    f = binpack.featurize(s)
    assert f.shape == (2,)
    np.testing.assert_array_equal(f, binpack.featurize(BinPackState(5, 0.11, ((0.1, 0.1),))))
    np.testing.assert_allclose(f, [-1.0, 1.0])
    assert BinPackDomain(progress=True).featurize(s).shape == (3,)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(5, 8))
def test_binpack_transitions_keep_invariants(seed, n_obj):
    rng = np.random.default_rng(seed)
    d = BinPackDomain()
    s = BinPackState(n_obj, float(rng.uniform(0.05, 0.11)))
    for a in d.uniform_actions(s, rng, 40):
        if d.feasible(s, a):
            s = d.transition(s, a)
            assert d.check_state(s)
        if d.is_goal(s):
            break


# ---------------------------------------------------------------- reconfiguration

T = (reconfig.TARGET_X, 0.35)


def test_clear_target_is_solved_immediately():
    d = ReconfigDomain()
    s = ReconfigState(T, ((0.1, 0.05), (0.1, 0.65), (0.3, 0.1), (0.3, 0.6), (0.2, 0.15)))
    r = search(s, d, 3, d.heuristic, UniformSampler(d), SearchBudget(5), np.random.default_rng(0))
    assert r.solved and r.plan == []


def test_moving_blocker_aside_reaches_goal():
    others = ((0.1, 0.05), (0.1, 0.65), (0.3, 0.1), (0.3, 0.6))
    s = ReconfigState(T, ((0.2, 0.35),) + others)
    assert not reconfig.reconfig_goal(s)
    shift = reconfig.OBSTACLE_SIZE + reconfig.TARGET_SIZE / 2 + reconfig.CLEARANCE + 0.001
    new = reconfig.reconfig_transition(s, (0.0, 0.2, 0.35 + shift + 0.05))
    assert reconfig.reconfig_goal(new)


def test_moving_other_object_makes_no_progress():
    s = ReconfigState(T, ((0.2, 0.35), (0.1, 0.05), (0.1, 0.65), (0.3, 0.1), (0.3, 0.6)))
    assert reconfig.reconfig_feasible(s, (1.0, 0.2, 0.5))
    new = reconfig.reconfig_transition(s, (1.0, 0.2, 0.5))
    assert not reconfig.reconfig_goal(new)
    assert reconfig.blocking_obstacles(new) == [0]


def test_blocked_pick_is_infeasible():
    # obstacle 1 sits in front of obstacle 0, so 0 cannot be picked
    s = ReconfigState(T, ((0.3, 0.35), (0.1, 0.35), (0.1, 0.05), (0.3, 0.1), (0.3, 0.6)))
    assert not reconfig.reconfig_feasible(s, (0.0, 0.2, 0.6))
    with pytest.raises(reconfig.InfeasibleMove):
        reconfig.reconfig_transition(s, (0.0, 0.2, 0.6))


def _oracle_feasible(state, action):
    idx = int(action[0])
    new = (action[1], action[2])
    others = [c for j, c in enumerate(state.obstacles) if j != idx]
    blockers = [square(c, reconfig.OBSTACLE_SIZE) for c in others]
    blockers.append(square(state.target, reconfig.TARGET_SIZE))
    regions = [corridor(state.obstacles[idx], reconfig.OBSTACLE_SIZE, reconfig.CLEARANCE),
               square(new, reconfig.OBSTACLE_SIZE),
               corridor(new, reconfig.OBSTACLE_SIZE, reconfig.CLEARANCE)]
    margin = min(abs(rect_margin(r, b)) for r in regions for b in blockers)
    ok = not any(raster_rects_meet(r, b) for r in regions for b in blockers)
    return ok, margin


def test_reconfig_feasibility_matches_raster_oracle():
    rng = np.random.default_rng(5)
    d = ReconfigDomain()
    checked = 0
    for i in range(10_000):
        s = reconfig.sample_instance(rng, require_blocked=False)
        a = d.uniform_actions(s, rng, 1)[0]
        expect, margin = _oracle_feasible(s, a)
        if margin < 2e-3:
            continue
        assert reconfig.reconfig_feasible(s, a) == expect
        checked += 1
    assert checked > 8000


def test_reconfig_instances():
    rng = np.random.default_rng(6)
    d = ReconfigDomain()
    for _ in range(300):
        s = reconfig.sample_instance(rng)
        assert d.check_state(s)
        assert len(s.obstacles) == 5
        assert s.target[0] == reconfig.TARGET_X
        assert reconfig.TARGET_SIZE / 2 <= s.target[1] <= reconfig.BIN_WIDTH - reconfig.TARGET_SIZE / 2
        assert not reconfig.reconfig_goal(s)


def test_reconfig_uniform_sampler():
    d = ReconfigDomain()
    s = reconfig.sample_instance(np.random.default_rng(0))
    a = d.uniform_actions(s, np.random.default_rng(1), 100_000)
    assert set(np.unique(a[:, 0])) == {0.0, 1.0, 2.0, 3.0, 4.0}
    box = reconfig.PLACEMENT_BOX
    assert np.all(box.contains(a[:, 1:]))
    for i in range(2):
        u = (a[:, 1 + i] - box.lo[i]) / (box.hi[i] - box.lo[i])
        assert abs(u.mean() - 0.5) <= 0.01
        assert stats.kstest(u, "uniform").pvalue > 0.01


def test_reconfig_features():
    s = reconfig.sample_instance(np.random.default_rng(3))
    f = reconfig.featurize(s)
    assert f.shape == (12,)
    swapped = ReconfigState(s.target, (s.obstacles[1], s.obstacles[0]) + s.obstacles[2:])
    assert not np.array_equal(f, reconfig.featurize(swapped))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_reconfig_transitions_keep_invariants(seed):
    rng = np.random.default_rng(seed)
    d = ReconfigDomain()
    s = reconfig.sample_instance(rng, require_blocked=False)
    for a in d.uniform_actions(s, rng, 60):
        if d.feasible(s, a):
            s = d.transition(s, a)
            assert d.check_state(s)


def test_instance_records_round_trip():
    for d in (BinPackDomain(), ReconfigDomain()):
        s = d.sample_instance(np.random.default_rng(0))
        assert d.instance_from_record(d.instance_record(s)) == s


def test_get_domain():
    assert get_domain("binpack").name == "binpack"
    assert get_domain("reconfig").name == "reconfig"
    with pytest.raises(ValueError):
        get_domain("stow")
