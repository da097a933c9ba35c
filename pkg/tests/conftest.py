"""Shared fixtures: small deterministic environments with known edge laws."""

import math

import pytest

from gwtwalk.environment import DiscreteLaw, Environment, make_canonical_law


@pytest.fixture(scope="session")
def canonical_law():
    return make_canonical_law()


@pytest.fixture()
def flat_chain():
    """Unary chain with V = 0 everywhere; depth-2 edge law (1/3, 2/3, 3)."""
    env = Environment(DiscreteLaw(rows=((1.0, (0.0,)),)), seed=1)
    env.realize_to_depth(4)
    return env


@pytest.fixture()
def doubling_chain():
    """Unary chain with V(d) = d ln 2; depth-2 edge law (1/7, 3/7, 7/4).

    The potential rises fast enough that excursions have small finite mean
    length, so walk-based tests stay cheap.
    """
    env = Environment(DiscreteLaw(rows=((1.0, (math.log(2.0),)),)), seed=1)
    env.realize_to_depth(4)
    return env
