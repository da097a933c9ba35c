"""Quadrature assembly of the heavy-range limit constants.

These tests run the full pipeline at a deliberately small budget: one
shared survivor ensemble, analytic walk constants for the unit Gaussian
(Sparre Andersen survival, exact renewal slope), and both evaluation
routes for the overshoot term.  The exact-constant shortcut keeps the
batch bookkeeping honest while making the runs cheap and reproducible.
"""

import math

import numpy as np
import pytest

from gwtwalk.estimates import ConstantEstimate
from gwtwalk.onedim.conditioned import collect_survivors
from gwtwalk.onedim.constants import WalkConstants
from gwtwalk.onedim.laws import gaussian_law
from gwtwalk.onedim.limits import (
    LimitConstants,
    _check_theta,
    lambda0,
    lambda1_product_route,
    lambda1_quadrature_route,
    limit_constants,
)

EXACT = ConstantEstimate(value=1.0 / math.sqrt(math.pi), se=0.0, method="exact")


@pytest.fixture(scope="module")
def ensemble():
    return collect_survivors(
        gaussian_law(), n=2500, target=30_000, rng=np.random.default_rng(604)
    )


@pytest.fixture(scope="module")
def exact_constants(ensemble):
    return WalkConstants(
        law=ensemble.law,
        c_plus=EXACT,
        c_minus=EXACT,
        c_R=ConstantEstimate(value=math.sqrt(2.0), se=0.0, method="exact"),
        sigma2_hat=ConstantEstimate(value=1.0, se=0.0, method="exact"),
        pool=None,
    )


@pytest.fixture(scope="module")
def assembled(ensemble, exact_constants):
    return limit_constants(
        0.5,
        gaussian_law(),
        ensemble=ensemble,
        constants=exact_constants,
        rng=np.random.default_rng(1),
    )


def test_theta_validation():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            _check_theta(bad)
    _check_theta(0.5)  # no raise
    with pytest.raises(ValueError):
        lambda0(0.0, gaussian_law(), constants=None)


def test_lambda0_positive_with_window_diagnostics(ensemble, exact_constants):
    est = lambda0(0.5, ensemble, exact_constants)
    assert est.value > 0.0
    assert est.se > 0.0 and math.isfinite(est.se)
    assert est.method == "lambda0-quadrature"
    assert len(est.batch_values) == ensemble.n_batches
    # the half-window rerun is always reported, as a bias probe
    assert "half_h_delta" in est.params
    assert est.params["nodes"] >= 10


def test_lambda1_routes_positive(ensemble, exact_constants):
    l1a = lambda1_quadrature_route(0.5, ensemble, exact_constants)
    l1b = lambda1_product_route(0.5, ensemble, exact_constants)
    assert l1a.value > 0.0 and l1b.value > 0.0
    assert l1a.method == "lambda1-double-quadrature"
    assert l1b.method == "lambda1-product-formula"
    assert l1b.params["lambda0_mirror"] > 0.0


def test_assembly_is_route_a_plus_lambda0(assembled):
    lc = assembled
    assert isinstance(lc, LimitConstants)
    assert lc.total.value == pytest.approx(
        lc.lambda0.value + lc.lambda1_route_a.value, rel=1e-12
    )
    assert lc.route_difference.value == pytest.approx(
        lc.lambda1_route_a.value - lc.lambda1_route_b.value, rel=1e-9
    )
    assert lc.lambda0.value > 0.0
    assert lc.total.value > 0.0


def test_routes_agree_at_small_budget(assembled):
    lc = assembled
    z = (
        abs(lc.route_difference.value) / lc.route_difference.se
        if lc.route_difference.se > 0
        else math.inf
    )
    assert lc.routes_agree, f"route gap z = {z:.2f}"


def test_to_dict_keys(assembled):
    d = assembled.to_dict()
    assert set(d) == {
        "theta", "law", "lambda0", "lambda0_se",
        "lambda1_route_a", "lambda1_route_a_se",
        "lambda1_route_b", "lambda1_route_b_se",
        "route_difference", "route_difference_se", "routes_agree",
        "lambda_total", "lambda_total_se", "notes",
    }
    assert d["theta"] == 0.5
    assert d["routes_agree"] is True
