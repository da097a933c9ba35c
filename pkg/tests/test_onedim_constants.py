"""Survival, ladder, and renewal constants of centred walks.

Symmetric continuous step laws admit two distribution-free exact values
(Sparre Andersen's ``1/sqrt(pi)`` survival constant and the ``sigma/sqrt(2)``
mean ladder height), which make sharp oracles for the Monte Carlo
estimators at modest budgets.
"""

import math

import numpy as np
import pytest

from gwtwalk.estimates import ConstantEstimate
from gwtwalk.onedim.constants import (
    LadderPool,
    estimate_constants,
    estimate_survival_constant,
    harvest_ladder_heights,
    product_identity_report,
    renewal_function,
)
from gwtwalk.onedim.laws import gaussian_law

MEAN_LADDER = 1.0 / math.sqrt(2.0)   # sigma / sqrt(2) for symmetric laws
C_SURVIVAL = 1.0 / math.sqrt(math.pi)


@pytest.fixture(scope="module")
def gaussian_pool():
    return harvest_ladder_heights(
        gaussian_law(),
        rng=np.random.default_rng(101),
        batches=8,
        steps_per_batch=200_000,
    )


@pytest.fixture(scope="module")
def gaussian_constants():
    return estimate_constants(
        gaussian_law(),
        n_grid=(400, 800, 1600, 3200),
        attempts=200_000,
        rng=np.random.default_rng(42),
        ladder_steps_per_batch=300_000,
        variance_samples=200_000,
    )


# ---------------------------------------------------------------------------
# ladder pool
# ---------------------------------------------------------------------------

def test_pool_heights_positive_and_batched(gaussian_pool):
    pool = gaussian_pool
    assert isinstance(pool, LadderPool)
    assert np.all(pool.heights > 0.0)
    assert pool.n_batches == 8
    assert sum(b.size for b in pool.batches()) == pool.heights.size
    # disjoint slices covering the array in order
    stops = [stop for _, stop in pool.batch_slices]
    assert stops[-1] == pool.heights.size


def test_gaussian_mean_ladder_height(gaussian_pool):
    est = gaussian_pool.mean_height()
    assert est.batch_values is not None and len(est.batch_values) == 8
    assert est.se > 0.0
    assert abs(est.value - MEAN_LADDER) <= 4.0 * est.se, (est.value, est.se)


def test_harvest_requires_two_batches():
    with pytest.raises(ValueError):
        harvest_ladder_heights(gaussian_law(), batches=1)


# ---------------------------------------------------------------------------
# renewal function
# ---------------------------------------------------------------------------

def test_renewal_at_zero_is_exact(gaussian_pool):
    est = renewal_function(gaussian_law(), 0.0, pool=gaussian_pool)
    assert est.value == 1.0
    assert est.se == 0.0
    assert "exact" in est.notes


def test_renewal_grows_linearly(gaussian_pool):
    rng = np.random.default_rng(9)
    r1 = renewal_function(gaussian_law(), 1.0, replicas=4000, rng=rng,
                          pool=gaussian_pool)
    r3 = renewal_function(gaussian_law(), 3.0, replicas=4000, rng=rng,
                          pool=gaussian_pool)
    assert 1.0 < r1.value < r3.value
    # slope between the two points should sit near 1/E[height] = sqrt(2)
    slope = (r3.value - r1.value) / 2.0
    assert slope == pytest.approx(math.sqrt(2.0), rel=0.15)


def test_renewal_rejects_negative_depth(gaussian_pool):
    with pytest.raises(ValueError):
        renewal_function(gaussian_law(), -1.0, pool=gaussian_pool)


# ---------------------------------------------------------------------------
# survival constant and the product identity
# ---------------------------------------------------------------------------

def test_survival_constant_gaussian():
    est = estimate_survival_constant(
        gaussian_law(),
        n_grid=(400, 800, 1600, 3200),
        attempts=200_000,
        rng=np.random.default_rng(7),
    )
    tol = max(4.0 * est.se, 0.03 * C_SURVIVAL)
    assert abs(est.value - C_SURVIVAL) <= tol, (est.value, est.se)


def test_survival_grid_validation():
    with pytest.raises(ValueError):
        estimate_survival_constant(gaussian_law(), n_grid=(1000,))
    with pytest.raises(ValueError):
        estimate_survival_constant(gaussian_law(), n_grid=(2000, 1000))


def test_constants_bundle_structure(gaussian_constants):
    wc = gaussian_constants
    for est in (wc.c_plus, wc.c_minus, wc.c_R, wc.sigma2_hat):
        assert isinstance(est, ConstantEstimate)
    assert abs(wc.sigma2_hat.value - 1.0) <= 4.0 * wc.sigma2_hat.se
    # symmetric law: both survival constants estimate the same number
    assert wc.c_plus.consistent_with(wc.c_minus, z=4.0)
    assert "elementary-renewal" in wc.c_R.notes


def test_product_identity(gaussian_constants):
    out = gaussian_constants.product_identity()
    assert set(out) == {
        "law", "product", "product_se", "target", "rel_err", "within_5pct"
    }
    assert out["target"] == pytest.approx(math.sqrt(2.0 / math.pi))
    assert out["rel_err"] < 0.10, out


def test_product_identity_report_wrapper(gaussian_constants):
    direct = gaussian_constants.product_identity()
    wrapped = product_identity_report(
        gaussian_law(), constants=gaussian_constants
    )
    assert wrapped == direct
