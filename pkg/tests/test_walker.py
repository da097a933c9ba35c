"""Excursion dynamics: transition kernel, tallies, caps, reproducibility."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwtwalk.environment import DiscreteLaw, Environment, make_canonical_law
from gwtwalk.quenched import edge_law
from gwtwalk.observables import path_stats
from gwtwalk.walker import (
    StepCapExceeded,
    StepCapPolicy,
    WalkRecord,
    estimate_hitting_probability,
    run_excursion,
    run_n_excursions,
    transition,
)

LN2 = math.log(2.0)


def test_transition_flat_chain(flat_chain):
    """Equal potentials: one child, so up/down split 50-50."""
    targets, probs = transition(flat_chain, 1)
    assert list(targets) == [0, 2]  # parent first
    np.testing.assert_allclose(probs, [0.5, 0.5])


def test_transition_weights_follow_potential(doubling_chain):
    # at node 1 (V = ln2): up weight e^{-V(1)}, down weight e^{-V(2)}
    targets, probs = transition(doubling_chain, 1)
    w_up = math.exp(-LN2)
    w_down = math.exp(-2 * LN2)
    np.testing.assert_allclose(
        probs, [w_up / (w_up + w_down), w_down / (w_up + w_down)]
    )
    assert probs.sum() == pytest.approx(1.0)


def test_root_edge_local_time_counts_excursions(doubling_chain):
    record = WalkRecord(doubling_chain, rng=2)
    run_n_excursions(record, 37)
    assert record.n_excursions == 37
    assert record.local_time(0) == 37  # one entry per excursion, by definition
    assert record.excursion_count(0) == 37
    assert record.at_anchor


def test_steps_are_twice_total_local_time(doubling_chain):
    """Every downward edge traversal is matched by the return crossing."""
    record = WalkRecord(doubling_chain, rng=4)
    run_n_excursions(record, 200)
    table = record.local_time_table()
    assert record.tau == 2 * sum(lt for lt, _ in table.values())
    assert record.tau == record.excursion_lengths.sum()


def test_excursion_summary(doubling_chain):
    record = WalkRecord(doubling_chain, rng=6)
    summary = run_excursion(record)
    assert not summary.truncated
    assert summary.length >= 2
    assert summary.length % 2 == 0
    assert summary.nodes_visited >= 1


def test_walk_is_reproducible(canonical_law):
    def run(seed):
        env = Environment(canonical_law, seed=77)
        record = WalkRecord(env, rng=seed)
        run_n_excursions(record, 500)
        return record.tau, sorted(record.local_time_table().items())

    assert run(123) == run(123)
    assert run(123) != run(124)


def test_walk_stream_is_separate_from_environment_stream(canonical_law):
    """The environment stream is consumed in realization order, so only the
    broods realized before the walks diverge are guaranteed to coincide —
    here the root's, which every walk realizes first."""
    env_a = Environment(canonical_law, seed=42)
    env_b = Environment(canonical_law, seed=42)
    run_n_excursions(WalkRecord(env_a, rng=1), 300)
    run_n_excursions(WalkRecord(env_b, rng=999), 300)
    np.testing.assert_array_equal(
        [env_a.V(c) for c in env_a.children(0)],
        [env_b.V(c) for c in env_b.children(0)],
    )


def test_step_cap_abort(doubling_chain):
    policy = StepCapPolicy(max_steps_total=10, on_breach="abort-replica")
    record = WalkRecord(doubling_chain, rng=8)
    with pytest.raises(StepCapExceeded):
        run_n_excursions(record, 10_000, policy)


def test_step_cap_records_truncation(doubling_chain):
    policy = StepCapPolicy(max_steps_total=10, on_breach="record-truncation")
    record = WalkRecord(doubling_chain, rng=8)
    run_n_excursions(record, 10_000, policy)
    assert record.truncated
    assert "budget" in record.truncation_reason
    with pytest.raises(StepCapExceeded):
        run_n_excursions(record, 1, policy)


def test_step_cap_validation():
    with pytest.raises(ValueError):
        StepCapPolicy(on_breach="explode")
    with pytest.raises(ValueError):
        StepCapPolicy(max_steps_total=0)


def test_hitting_probability_matches_edge_law(doubling_chain):
    el = edge_law(path_stats(doubling_chain, 2))
    est = estimate_hitting_probability(doubling_chain, 2, n_excursions=40_000,
                                       rng=5)
    assert est.method == "excursion-mc"
    assert abs(est.value - el.a) <= 3.0 * est.se


@settings(max_examples=15, deadline=None)
@given(
    d1=st.floats(min_value=0.7, max_value=3.0),
    d2=st.floats(min_value=0.7, max_value=3.0),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_tally_invariants_hold_on_random_trees(d1, d2, seed):
    """tau = 2 * sum of local times and the root tally equals the excursion
    count, for arbitrary two-child laws with uphill potentials (recurrent,
    short excursions)."""
    env = Environment(DiscreteLaw(rows=((1.0, (d1, d2)),)), seed=seed)
    record = WalkRecord(env, rng=seed + 1)
    run_n_excursions(record, 50)
    table = record.local_time_table()
    assert record.tau == 2 * sum(lt for lt, _ in table.values())
    assert record.local_time(0) == 50
    assert record.n_excursions == 50
    for node, (lt, visits) in table.items():
        assert 1 <= visits <= min(lt, 50)
