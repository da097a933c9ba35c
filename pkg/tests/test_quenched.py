"""Quenched edge laws, single-excursion local times, and geometric-sum tails.

The closed forms here all have hand-computable values on unary chains, so
most oracles below are exact fractions.  The linear-solve cross-check is the
one genuinely independent route: it never sees the (a, b, H) formulas.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwtwalk.environment import Environment, make_canonical_law
from gwtwalk.observables import path_stats
from gwtwalk.quenched import (
    EdgeLaw,
    absorption_solve,
    check_geo_sum_bounds,
    default_bound_grid,
    edge_law,
    geo_sum_distribution,
    one_excursion_heavy_logprob,
    one_excursion_heavy_prob,
    single_excursion_law,
    sweep_geo_sum_bounds,
)


# ---------------------------------------------------------------------------
# edge law closed forms
# ---------------------------------------------------------------------------

def test_edge_law_flat_chain_depth_two(flat_chain):
    e = edge_law(path_stats(flat_chain, 2))
    assert e.H == pytest.approx(3.0, abs=1e-14)
    assert e.a == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert e.b == pytest.approx(2.0 / 3.0, abs=1e-14)
    assert e.log_a == pytest.approx(math.log(1.0 / 3.0), abs=1e-13)
    assert e.log_b == pytest.approx(math.log(2.0 / 3.0), abs=1e-13)


def test_edge_law_doubling_chain(doubling_chain):
    # depth 1: H = 1/2 + 1 = 3/2, a = (1/2)/(3/2) = 1/3, b = 1 - 2/3 = 1/3
    e1 = edge_law(path_stats(doubling_chain, 1))
    assert e1.H == pytest.approx(1.5, abs=1e-14)
    assert e1.a == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert e1.b == pytest.approx(1.0 / 3.0, abs=1e-14)
    # depth 2: H = 1/4 + 1/2 + 1 = 7/4
    e2 = edge_law(path_stats(doubling_chain, 2))
    assert e2.H == pytest.approx(7.0 / 4.0, abs=1e-14)
    assert e2.a == pytest.approx(1.0 / 7.0, abs=1e-14)
    assert e2.b == pytest.approx(3.0 / 7.0, abs=1e-14)


def test_edge_law_root_is_degenerate(flat_chain):
    e = edge_law(path_stats(flat_chain, 0))
    assert e.a == 1.0
    assert e.b == 0.0
    assert e.H == 1.0


def test_edge_law_validation():
    with pytest.raises(ValueError):
        EdgeLaw(a=0.0, b=0.5, H=2.0, log_a=-math.inf, log_b=math.log(0.5))
    with pytest.raises(ValueError):
        EdgeLaw(a=1.5, b=0.5, H=2.0, log_a=math.log(1.5), log_b=math.log(0.5))
    with pytest.raises(ValueError):
        EdgeLaw(a=0.5, b=1.0, H=2.0, log_a=math.log(0.5), log_b=0.0)


def test_edge_law_matches_absorption_solve():
    """Formula vs harmonic linear solve on random trees, to solver precision."""
    for seed in (2, 3, 4, 5):
        env = Environment(make_canonical_law(), seed=seed)
        env.realize_to_depth(3)
        targets = list(range(env.n_nodes))
        solved = absorption_solve(env, targets)
        assert solved[0] == 1.0
        for x in targets:
            formula = edge_law(path_stats(env, x)).a
            assert solved[x] == pytest.approx(formula, abs=1e-10), (seed, x)


# ---------------------------------------------------------------------------
# single-excursion local time
# ---------------------------------------------------------------------------

def test_single_excursion_law_flat_chain(flat_chain):
    law = single_excursion_law(edge_law(path_stats(flat_chain, 2)))
    assert law.tail(0) == 1.0
    assert law.tail(1) == pytest.approx(1.0 / 3.0, rel=1e-14)
    assert law.tail(2) == pytest.approx(2.0 / 9.0, rel=1e-14)
    assert law.pmf(-1) == 0.0
    assert law.pmf(0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert law.pmf(1) == pytest.approx(1.0 / 9.0, rel=1e-13)
    # mean equals e^{-V} = 1 on the flat chain
    assert law.mean() == pytest.approx(1.0, rel=1e-14)
    assert math.exp(law.log_tail(5)) == pytest.approx(law.tail(5), rel=1e-13)


def test_single_excursion_law_root_edge(flat_chain):
    law = single_excursion_law(edge_law(path_stats(flat_chain, 0)))
    assert law.tail(1) == 1.0
    assert law.tail(2) == 0.0
    assert law.pmf(1) == 1.0
    assert law.log_tail(2) == -math.inf
    assert law.mean() == 1.0


def test_single_excursion_mean_is_conductance(doubling_chain):
    for node in range(5):
        stats = path_stats(doubling_chain, node)
        law = single_excursion_law(edge_law(stats))
        assert law.mean() == pytest.approx(math.exp(-stats.V), rel=1e-12)


def test_one_excursion_heavy_frozen(doubling_chain):
    # a = b = 1/3 at depth 1: 2 * (1/3) * (2/3) * (1/3) = 4/27
    e = edge_law(path_stats(doubling_chain, 1))
    p = one_excursion_heavy_prob(2, 2, e)
    assert p == pytest.approx(4.0 / 27.0, rel=1e-13)
    assert one_excursion_heavy_logprob(2, 2, e) == pytest.approx(
        math.log(4.0 / 27.0), rel=1e-12
    )


def test_one_excursion_heavy_validation_and_degenerate(flat_chain):
    e = edge_law(path_stats(flat_chain, 2))
    with pytest.raises(ValueError):
        one_excursion_heavy_logprob(0, 1, e)
    with pytest.raises(ValueError):
        one_excursion_heavy_logprob(1, 0, e)
    root = edge_law(path_stats(flat_chain, 0))
    # a = 1 means two excursions cannot have exactly one visitor
    assert one_excursion_heavy_logprob(2, 1, root) == -math.inf
    assert one_excursion_heavy_prob(2, 1, root) == 0.0
    # b = 0 means local time never exceeds 1
    assert one_excursion_heavy_logprob(1, 2, root) == -math.inf
    assert one_excursion_heavy_prob(1, 1, root) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# geometric-sum distribution
# ---------------------------------------------------------------------------

def test_geo_sum_two_fair_excursions():
    dist = geo_sum_distribution(2, 0.5, 0.5)
    assert dist.pmf[0] == pytest.approx(0.25, abs=1e-15)
    assert dist.sf(1) == pytest.approx(0.75, abs=1e-14)
    assert dist.sf(0) == 1.0
    assert dist.cdf(-1) == 0.0
    assert dist.tail_mass < 1e-12


def test_geo_sum_cdf_sf_complement():
    dist = geo_sum_distribution(6, 0.4, 0.3)
    for j in (0, 1, 3, 10):
        assert dist.cdf(j) + dist.sf(j + 1) == pytest.approx(1.0, abs=1e-12)


def test_geo_sum_mean_matches_closed_form():
    for n, a, b in ((3, 0.5, 0.2), (10, 0.9, 0.6), (2, 0.1, 0.0)):
        dist = geo_sum_distribution(n, a, b)
        assert dist.mean_cap() == pytest.approx(n * a / (1.0 - b), rel=1e-8)


def test_geo_sum_fixed_cap_reports_tail():
    dist = geo_sum_distribution(4, 0.9, 0.6, cap=3)
    assert dist.tail_mass > 0.01
    assert len(dist.pmf) == 4
    # the truncated mass is carried by sf, never dropped
    assert dist.sf(4) == pytest.approx(dist.tail_mass, abs=1e-15)
    assert dist.cdf(3) + dist.tail_mass == pytest.approx(1.0, abs=1e-12)


def test_geo_sum_validation():
    with pytest.raises(ValueError):
        geo_sum_distribution(0, 0.5, 0.5)
    with pytest.raises(ValueError):
        geo_sum_distribution(2, 0.0, 0.5)
    with pytest.raises(ValueError):
        geo_sum_distribution(2, 0.5, 1.0)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=10),
    a=st.floats(min_value=0.05, max_value=0.95),
    b=st.floats(min_value=0.0, max_value=0.85),
)
def test_geo_sum_zero_mass_identity(n, a, b):
    """P(sum = 0) = (1-a)^n and P(sum >= 1) its complement, exactly."""
    dist = geo_sum_distribution(n, a, b)
    assert dist.pmf[0] == pytest.approx((1.0 - a) ** n, rel=1e-10)
    assert dist.sf(1) == pytest.approx(1.0 - (1.0 - a) ** n, rel=1e-9)
    assert np.all(dist.pmf >= 0.0)


# ---------------------------------------------------------------------------
# tail-bound checks
# ---------------------------------------------------------------------------

def test_bound_check_validation():
    with pytest.raises(ValueError):
        check_geo_sum_bounds(2, 0.5, 0.5, t=4, lam=0.0)
    with pytest.raises(ValueError):
        check_geo_sum_bounds(2, 0.5, 0.5, t=4, lam=1.0)
    with pytest.raises(ValueError):
        check_geo_sum_bounds(2, 0.5, 0.5, t=4, A=-1.0)
    with pytest.raises(ValueError):
        check_geo_sum_bounds(2, 0.5, 0.5, t=0)


def test_bound_check_skips_when_threshold_too_low():
    # t(1-b)/(na) - 1 = 2*0.5/4 - 1 < 0: the upper-tail bound does not apply
    report = check_geo_sum_bounds(8, 0.5, 0.5, t=2)
    assert report.skipped
    assert report.implied_c is None
    assert report.upper_prob is None
    # the lower-tail check still ran
    assert 0.0 <= report.lower_prob <= 1.0
    assert report.lower_holds


def test_bound_check_reports_positive_constants():
    report = check_geo_sum_bounds(8, 0.5, 0.5, t=17, A=2.0)
    assert not report.skipped
    assert report.eta is not None and report.eta > 0.0
    assert report.lower_holds
    assert report.implied_c is not None and report.implied_c > 0.0
    assert report.implied_c2 is not None and report.implied_c2 > 0.0
    # the two-visit variant subtracts mass, so it can only look heavier
    assert report.upper2_prob <= report.upper_prob
    payload = report.to_json()
    assert '"lower_holds": true' in payload


def test_default_grid_shape_and_separation():
    grid = default_bound_grid()
    assert len(grid) == 27
    for p in grid:
        assert p["t"] * (1.0 - p["b"]) >= 1.5 * p["n"] * p["a"]
        assert p["A"] == pytest.approx(0.5 * p["n"] * p["a"])


def test_sweep_default_grid_all_lower_bounds_hold():
    reports = sweep_geo_sum_bounds(default_bound_grid())
    assert len(reports) == 27
    for r in reports:
        assert r.lower_holds, (r.n, r.a, r.b)
        assert not r.skipped
