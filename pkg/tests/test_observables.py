"""Range statistics, path functionals, martingale tables, barrier events."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwtwalk.environment import Environment, make_canonical_law
from gwtwalk.observables import (
    BarrierSpec,
    check_path_invariants,
    heavy_range,
    heavy_range_by_excursions,
    heavy_threshold,
    in_barrier,
    in_barrier_mask,
    martingales,
    martingales_streamed,
    path_stats,
    path_stats_table,
    sample_martingale_ensemble,
    stopping_line_hit,
)
from gwtwalk.walker import WalkRecord, run_n_excursions

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# thresholds and ranges
# ---------------------------------------------------------------------------

def test_heavy_threshold_values():
    assert heavy_threshold(50, 0.5) == 8      # ceil(sqrt(50)) = ceil(7.07...)
    assert heavy_threshold(200, 0.5) == 15
    assert heavy_threshold(1024, 0.5) == 32   # exact power
    assert heavy_threshold(1, 0.9) == 1
    with pytest.raises(ValueError):
        heavy_threshold(10, 0.0)
    with pytest.raises(ValueError):
        heavy_threshold(10, 1.0)


def test_heavy_range_counts_threshold_crossers(doubling_chain):
    record = WalkRecord(doubling_chain, rng=3)
    run_n_excursions(record, 100)
    table = record.local_time_table()
    for k in (1, 2, 5, 50, 100):
        expected = sum(1 for lt, _ in table.values() if lt >= k)
        assert heavy_range(record, k) == expected
    # the root edge is crossed once per excursion, so R >= 1 up to k = n
    assert heavy_range(record, 100) >= 1
    assert heavy_range(record, 101) == 0


def test_heavy_range_partitions_by_visit_count(doubling_chain):
    record = WalkRecord(doubling_chain, rng=9)
    run_n_excursions(record, 300)
    for k in (1, 2, 4, 16):
        parts = heavy_range_by_excursions(record, k)
        assert sum(parts.values()) == heavy_range(record, k)
        assert all(j >= 1 for j in parts)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(1, 40))
def test_range_partition_on_random_environments(seed, k):
    env = Environment(make_canonical_law(), seed=seed)
    record = WalkRecord(env, rng=seed ^ 0x5DEECE66D)
    run_n_excursions(record, 60)
    parts = heavy_range_by_excursions(record, k)
    assert sum(parts.values()) == heavy_range(record, k)


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

def test_path_stats_on_doubling_chain(doubling_chain):
    st2 = path_stats(doubling_chain, 2)
    assert st2.depth == 2
    assert st2.V == pytest.approx(2 * LN2)
    assert st2.v_max == pytest.approx(2 * LN2)
    assert st2.v_min == 0.0
    # H = 1/4 + 1/2 + 1 over the path (root, d1, d2)
    assert math.exp(st2.log_H) == pytest.approx(7.0 / 4.0, rel=1e-12)


def test_path_stats_root():
    env = Environment(make_canonical_law(), seed=0)
    st0 = path_stats(env, 0)
    assert st0.depth == 0
    assert st0.V == 0.0
    assert st0.log_H == 0.0  # H = 1 exactly


# ---------------------------------------------------------------------------
# stopping line
# ---------------------------------------------------------------------------

def test_stopping_line_on_chain(doubling_chain):
    """On the doubling chain H_d = 2 - 2^-d < 2, so the line at r = 2 is
    never crossed while r = 1.5 is crossed from depth 1 on."""
    record = WalkRecord(doubling_chain, rng=12)
    run_n_excursions(record, 500)
    assert record.max_depth_reached >= 1
    assert stopping_line_hit(record, 1.5)
    assert not stopping_line_hit(record, 2.0)
    with pytest.raises(ValueError):
        stopping_line_hit(record, 1.0)


# ---------------------------------------------------------------------------
# martingale tables
# ---------------------------------------------------------------------------

def _direct_tables(env, depth):
    """Independent recomputation of (W_m, D_m) from the raw arena."""
    W = np.zeros(depth + 1)
    D = np.zeros(depth + 1)
    for i in range(env.n_nodes):
        m = env.depth(i)
        if m <= depth:
            v = env.V(i)
            W[m] += math.exp(-v)
            D[m] += v * math.exp(-v)
    return W, D


def test_martingales_match_direct_sum():
    env = Environment(make_canonical_law(), seed=21)
    env.realize_to_depth(6)
    table = martingales(env, 6)
    W, D = _direct_tables(env, 6)
    np.testing.assert_allclose(table.W, W, rtol=1e-12)
    np.testing.assert_allclose(table.D, D, rtol=1e-12)
    assert table.W[0] == 1.0
    assert table.D[0] == 0.0
    assert table.complete_to == 6
    assert not table.truncated


def test_streamed_equals_exact_on_fully_realized_tree():
    env = Environment(make_canonical_law(), seed=33)
    env.realize_to_depth(5)
    exact = martingales(env, 5)
    streamed = martingales_streamed(env, 5)
    np.testing.assert_allclose(streamed.W, exact.W, rtol=1e-12)
    np.testing.assert_allclose(streamed.D, exact.D, rtol=1e-12)


def test_streamed_leaves_environment_untouched():
    env = Environment(make_canonical_law(), seed=8)
    env.realize_to_depth(2)
    before = env.n_nodes
    martingales_streamed(env, 8, rng=np.random.default_rng(4))
    assert env.n_nodes == before


def test_streamed_is_deterministic_given_rng():
    env1 = Environment(make_canonical_law(), seed=13)
    env1.realize_to_depth(2)
    t1 = martingales_streamed(env1, 7, rng=np.random.default_rng(99))
    env2 = Environment(make_canonical_law(), seed=13)
    env2.realize_to_depth(2)
    t2 = martingales_streamed(env2, 7, rng=np.random.default_rng(99))
    np.testing.assert_array_equal(t1.W, t2.W)
    np.testing.assert_array_equal(t1.D, t2.D)


def test_ensemble_shapes_and_anchors():
    W, D = sample_martingale_ensemble(make_canonical_law(), 6, 500,
                                      np.random.default_rng(3))
    assert W.shape == (500, 7)
    assert D.shape == (500, 7)
    np.testing.assert_array_equal(W[:, 0], 1.0)
    np.testing.assert_array_equal(D[:, 0], 0.0)
    assert (W > 0).all()
    # mean of the additive martingale is 1 at every generation
    se = W[:, 6].std(ddof=1) / math.sqrt(500)
    assert abs(W[:, 6].mean() - 1.0) < 4 * se


# ---------------------------------------------------------------------------
# barrier specs
# ---------------------------------------------------------------------------

def test_path_table_matches_per_node_stats():
    env = Environment(make_canonical_law(), seed=19)
    env.realize_to_depth(4)
    table = path_stats_table(env)
    check_path_invariants(table)
    for i in range(env.n_nodes):
        s = path_stats(env, i)
        assert table.V[i] == pytest.approx(s.V, abs=1e-12)
        assert table.v_max[i] == pytest.approx(s.v_max, abs=1e-12)
        assert table.log_H[i] == pytest.approx(s.log_H, rel=1e-10)


def test_barrier_mask_agrees_with_scalar_checks():
    env = Environment(make_canonical_law(), seed=19)
    env.realize_to_depth(4)
    table = path_stats_table(env)
    specs = [
        BarrierSpec(kind="gap-end", n=64, theta=0.5, a=1.0),
        BarrierSpec(kind="peak-end", n=64, theta=0.5, a=1.0),
        BarrierSpec(kind="peak-above", n=64, theta=0.5, a=2.0),
        BarrierSpec(kind="gap-window", n=64, theta=0.5, a=0.5, b=2.0),
        BarrierSpec(kind="below-line", n=64, coeff=1.0, sign=1),
        BarrierSpec(kind="stopping-line", n=64, r=1.5),
    ]
    for spec in specs:
        mask = in_barrier_mask(table, spec)
        assert mask.shape == (env.n_nodes,)
        for i in range(env.n_nodes):
            assert mask[i] == in_barrier(path_stats(env, i), spec), spec.kind


def test_barrier_spec_validation():
    with pytest.raises(ValueError):
        BarrierSpec(kind="no-such-event", n=8)
    with pytest.raises(ValueError):
        BarrierSpec(kind="stopping-line", n=8, r=0.5)
