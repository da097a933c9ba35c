"""Survival-conditioned functionals: ensembles, C0, C_ab, and G.

The sharp oracle here is the Brownian meander endpoint law: conditioned on
staying nonnegative, ``S_n / (sigma sqrt(n))`` is asymptotically Rayleigh,
so with the ceiling pushed out of the way ``C0(a, b) -> b e^{-b^2/2}`` for
unit variance.  Together with the exact Sparre Andersen ``c_plus`` this
pins the whole normalisation chain.
"""

import math

import numpy as np
import pytest

from gwtwalk.estimates import ConstantEstimate
from gwtwalk.onedim import _kernels
from gwtwalk.onedim.conditioned import (
    c_ab_node_values,
    c0_node_values,
    collect_survivors,
    estimate_C0,
    estimate_C_ab,
    estimate_G,
)
from gwtwalk.onedim.constants import WalkConstants
from gwtwalk.onedim.laws import gaussian_law, rademacher_law

C_PLUS_EXACT = ConstantEstimate(
    value=1.0 / math.sqrt(math.pi), se=0.0, method="exact-sparre-andersen"
)


@pytest.fixture(scope="module")
def ensemble():
    return collect_survivors(
        gaussian_law(), n=2500, target=30_000, rng=np.random.default_rng(404)
    )


@pytest.fixture(scope="module")
def exact_constants(ensemble):
    """Analytic constants of the unit Gaussian, for quadrature plumbing."""
    return WalkConstants(
        law=ensemble.law,
        c_plus=C_PLUS_EXACT,
        c_minus=C_PLUS_EXACT,
        c_R=ConstantEstimate(value=math.sqrt(2.0), se=0.0, method="exact"),
        sigma2_hat=ConstantEstimate(value=1.0, se=0.0, method="exact"),
        pool=None,
    )


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def test_ensemble_structure(ensemble):
    ens = ensemble
    assert ens.n == 2500
    assert ens.alpha == 0.0
    assert ens.n_batches == 10
    assert ens.features.shape[1] == _kernels.N_FEATURES
    assert ens.total_attempts == int(ens.attempts.sum())
    # survival is a rare event at this horizon: ~ c_plus / 50
    assert 0.001 < ens.acceptance_rate < 0.05
    end = ens.features[:, _kernels.F_END]
    high = ens.features[:, _kernels.F_MAX]
    prevmax = ens.features[:, _kernels.F_PREVMAX]
    maxdd = ens.features[:, _kernels.F_MAXDD]
    assert np.all(end >= 0.0)
    assert np.all(high >= end)
    assert np.all(prevmax <= high + 1e-12)
    assert np.all((maxdd >= 0.0) & (maxdd <= high + 1e-12))


def test_collect_survivors_validation():
    with pytest.raises(ValueError):
        collect_survivors(gaussian_law(), n=50)
    with pytest.raises(ValueError):
        collect_survivors(gaussian_law(), n=400, target=50)


def test_batch_rates_alignment(ensemble):
    ones = np.ones(ensemble.features.shape[0])
    pooled, per_batch = ensemble.batch_rates(ones)
    assert pooled == pytest.approx(ensemble.acceptance_rate)
    assert per_batch.shape == (ensemble.n_batches,)
    with pytest.raises(ValueError):
        ensemble.batch_rates(np.ones(3))


# ---------------------------------------------------------------------------
# C0: meander endpoint density
# ---------------------------------------------------------------------------

def test_c0_matches_rayleigh_density(ensemble):
    """With the ceiling out of reach, C0(., b) -> b exp(-b^2 / 2)."""
    est = estimate_C0(ensemble, a=50.0, b=1.0, c_plus=C_PLUS_EXACT, h=1.0)
    target = math.exp(-0.5)
    tol = max(4.0 * est.se, 0.08 * target)
    assert abs(est.value - target) <= tol, (est.value, est.se, target)
    assert est.method == "meander-endpoint-density"
    assert est.params["survivors"] == ensemble.features.shape[0]


def test_c0_node_validation(ensemble):
    with pytest.raises(ValueError):
        c0_node_values(ensemble, np.array([1.0]), np.array([1.0, 2.0]),
                       C_PLUS_EXACT, h=0.25)
    with pytest.raises(ValueError):
        c0_node_values(ensemble, np.array([-1.0]), np.array([1.0]),
                       C_PLUS_EXACT, h=0.25)
    with pytest.raises(ValueError):
        c0_node_values(ensemble, np.array([1.0]), np.array([1.0]),
                       C_PLUS_EXACT, h=0.0)


def test_c0_rejects_lattice_laws():
    ens = collect_survivors(
        rademacher_law(), n=400, target=2000, rng=np.random.default_rng(3)
    )
    with pytest.raises(ValueError, match="lattice"):
        c0_node_values(ens, np.array([1.0]), np.array([1.0]),
                       C_PLUS_EXACT, h=0.25)


# ---------------------------------------------------------------------------
# C_ab: strict final maximum
# ---------------------------------------------------------------------------

def test_c_ab_monotone_on_shared_ensemble(ensemble):
    """Same paths, nested events: monotonicity holds deterministically."""
    b_grid = np.array([0.25, 0.5, 1.0, 1.5])
    values, batch = c_ab_node_values(ensemble, np.full(4, 2.0), b_grid)
    assert batch.shape == (ensemble.n_batches, 4)
    assert np.all(np.diff(values) <= 0.0)      # decreasing in b
    a_grid = np.array([0.5, 1.0, 2.0, 4.0])
    values_a, _ = c_ab_node_values(ensemble, a_grid, np.full(4, 0.25))
    assert np.all(np.diff(values_a) >= 0.0)    # increasing in a
    assert np.all(values >= 0.0) and np.all(values_a >= 0.0)


def test_c_ab_estimate_positive(ensemble):
    est = estimate_C_ab(ensemble, a=2.0, b=0.5)
    assert est.value > 0.0
    assert est.se > 0.0
    assert est.method == "strict-final-max"


def test_c_ab_requires_zero_alpha():
    with pytest.raises(NotImplementedError):
        estimate_C_ab(gaussian_law(), a=1.0, b=0.5, alpha=0.25)
    ens_shifted = collect_survivors(
        gaussian_law(), n=400, target=2000, alpha=0.5,
        rng=np.random.default_rng(5),
    )
    with pytest.raises(ValueError, match="alpha"):
        c_ab_node_values(ens_shifted, np.array([1.0]), np.array([0.5]))


# ---------------------------------------------------------------------------
# G: the two-sided functional
# ---------------------------------------------------------------------------

def test_g_vanishes_on_the_indicator(exact_constants):
    for a, b in ((0.5, 0.5), (0.3, 0.7)):
        est = estimate_G(gaussian_law(), a, b, constants=exact_constants)
        assert est.value == 0.0
        assert est.se == 0.0
        assert est.params["reason"] == "indicator a > b"


def test_g_positive_finite(ensemble, exact_constants):
    est = estimate_G(ensemble, 1.0, 0.4, constants=exact_constants)
    assert est.value >= 0.0
    assert math.isfinite(est.value) and math.isfinite(est.se)
    assert est.params["nodes"] > 20
    assert est.batch_values is not None
