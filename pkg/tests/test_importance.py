import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gandi import neuralnet as nn
from gandi.importance import (ImportanceConfig, NetworkImportance, NotFittedError, SampleSet,
                              TabularImportance, empirical_J, fit_importance, weight)
from oracles import per_bin_ratio


def _keys(counts):
    return SampleSet.unconditional([[k] for k, c in counts.items() for _ in range(c)])


def _tabular(on_counts, off_counts):
    return fit_importance(_keys(on_counts), _keys(off_counts),
                          ImportanceConfig(backend="tabular")).model


def test_tabular_closed_form_example():
    model = _tabular({0.0: 1, 1.0: 3}, {0.0: 3, 1.0: 1})
    assert model.table[(0.0,)] == pytest.approx(1 / 3)
    assert model.table[(1.0,)] == 3.0


def test_identical_multisets_give_unit_weights():
    model = _tabular({0.0: 2, 1.0: 5}, {0.0: 2, 1.0: 5})
    assert set(model.table.values()) == {1.0}


def test_weight_queries():
    model = _tabular({0.0: 1, 1.0: 3}, {0.0: 3, 1.0: 1})
    assert weight(model, [], (1.0,)) == 3.0
    assert weight(model, [], np.array([1.0])) == 3.0
    assert weight(model, [], (7.0,)) == 0.0


def test_network_negative_output_clamped():
    net = nn.DenseNet([1, 1], ["linear"], [np.zeros((1, 1))], [np.array([-0.3])])
    assert weight(NetworkImportance(net), np.zeros(0), [0.5]) == 0.0


def test_unfitted_model():
    with pytest.raises(NotFittedError):
        weight(None, [], [0.0])


def test_empirical_J_examples():
    four = SampleSet.unconditional(np.zeros((4, 1)))
    zero = TabularImportance({(0.0,): 0.0})
    one = TabularImportance({(0.0,): 1.0})
    assert empirical_J(zero, four, four) == 0.0
    assert empirical_J(one, four, four) == -4.0
    on, off = _keys({0.0: 1, 1.0: 3}), _keys({0.0: 3, 1.0: 1})
    model = _tabular({0.0: 1, 1.0: 3}, {0.0: 3, 1.0: 1})
    assert empirical_J(model, on, off) == pytest.approx(3 / 9 + 9 - 2 * (1 / 3 + 9))


def test_fit_errors():
    one = SampleSet.unconditional([[0.0]])
    empty = SampleSet.unconditional(np.zeros((0, 1)))
    with pytest.raises(ValueError):
        fit_importance(empty, one, ImportanceConfig(backend="tabular"))
    with pytest.raises(ValueError):
        fit_importance(one, SampleSet.unconditional([[0.0, 1.0]]),
                       ImportanceConfig(backend="tabular"))


def test_network_objective_decreases():
    rng = np.random.default_rng(0)
    on = SampleSet.unconditional(rng.normal(0.0, 0.3, (200, 1)))
    off = SampleSet.unconditional(rng.uniform(-1, 1, (400, 1)))
    fit = fit_importance(on, off, ImportanceConfig(epochs=30, validation_fraction=0.0), rng)
    assert fit.curve[-1] <= fit.curve[0]
    w = fit.model.weights(SampleSet.unconditional([[0.0], [0.9]]))
    assert w[0] > w[1]


def test_empty_take_keeps_context_width():
    s = SampleSet(np.ones((3, 2)), np.ones((3, 1)))
    assert s.take(np.zeros(0, dtype=int)).contexts.shape == (0, 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=30),
       st.lists(st.integers(0, 5), min_size=1, max_size=30))
def test_tabular_matches_per_bin_oracle(on, off):
    model = _tabular({}, {}) if False else fit_importance(
        SampleSet.unconditional([[float(v)] for v in on]),
        SampleSet.unconditional([[float(v)] for v in off]),
        ImportanceConfig(backend="tabular")).model
    oracle = per_bin_ratio([(float(v),) for v in on], [(float(v),) for v in off])
    assert set(model.table) == set(oracle)
    for k, v in oracle.items():
        assert abs(model.table[k] - v) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_weights_never_negative(seed):
    rng = np.random.default_rng(seed)
    net = nn.DenseNet([2, 4, 1], ["relu", "linear"], rng=rng)
    w = NetworkImportance(net).weights(SampleSet.unconditional(rng.normal(size=(50, 2))))
    assert np.all(w >= 0)
