"""Step laws and single-path summaries for the one-dimensional laboratory."""

import math

import numpy as np
import pytest

from gwtwalk.onedim.laws import (
    KIND_GAUSSIAN,
    KIND_RADEMACHER,
    Walk1DLaw,
    gaussian_law,
    mixture_law,
    moment_check,
    rademacher_law,
    tilted_gaussian_law,
    uniform_law,
)
from gwtwalk.onedim.walks import simulate_walk

LN2 = math.log(2.0)


def test_tilted_law_matches_canonical_environment():
    law = tilted_gaussian_law()
    assert law.sigma2 == pytest.approx(2 * LN2, abs=1e-15)
    assert law.kind == KIND_GAUSSIAN
    assert law.p0 == pytest.approx(math.sqrt(2 * LN2))
    assert not law.lattice


def test_law_variances_and_flags():
    assert gaussian_law(1.5).sigma2 == pytest.approx(2.25)
    assert uniform_law(2.0).sigma2 == pytest.approx(4.0 / 3.0)
    assert mixture_law(0.25).sigma2 == pytest.approx(1.0 / 3.0 + 0.0625)
    assert rademacher_law().lattice
    for law in (gaussian_law(), uniform_law(), mixture_law()):
        assert not law.lattice
        assert law.sigma == pytest.approx(math.sqrt(law.sigma2))
    kind, p0, p1 = rademacher_law().kernel_params()
    assert kind == KIND_RADEMACHER
    assert (p0, p1) == (0.0, 0.0)


def test_law_round_trips_through_config():
    cfg = mixture_law(0.3).to_config()
    assert cfg["kind"] == "mixture"
    assert cfg["p0"] == pytest.approx(0.3)
    assert cfg["lattice"] is False


def test_law_constructors_validate():
    with pytest.raises(ValueError):
        gaussian_law(0.0)
    with pytest.raises(ValueError):
        uniform_law(-1.0)
    with pytest.raises(ValueError):
        mixture_law(0.0)
    with pytest.raises(ValueError):
        Walk1DLaw(name="x", kind=99, p0=1.0, p1=0.0, sigma2=1.0)
    with pytest.raises(ValueError):
        Walk1DLaw(name="x", kind=KIND_GAUSSIAN, p0=1.0, p1=0.0, sigma2=0.0)


@pytest.mark.parametrize(
    "law",
    [gaussian_law(), uniform_law(), mixture_law(), rademacher_law(),
     tilted_gaussian_law()],
    ids=lambda law: law.name,
)
def test_moment_assumptions_hold(law):
    out = moment_check(law, rng=np.random.default_rng(5), samples=50_000)
    assert out["ok"], out
    assert out["sigma2_analytic"] == law.sigma2


def test_moment_check_needs_samples():
    with pytest.raises(ValueError):
        moment_check(gaussian_law(), samples=10)


# ---------------------------------------------------------------------------
# path summaries
# ---------------------------------------------------------------------------

def test_zero_horizon_summary():
    s = simulate_walk(gaussian_law(), 0)
    assert (s.n, s.end, s.high, s.low, s.argmax) == (0, 0.0, 0.0, 0.0, 0)
    assert s.log_h == 0.0
    assert s.h == 1.0
    assert s.log_sum_exp_neg == 0.0


def test_negative_horizon_rejected():
    with pytest.raises(ValueError):
        simulate_walk(gaussian_law(), -1)


def test_summary_matches_direct_path_computation():
    law = mixture_law()
    n = 60
    summary = simulate_walk(law, n, rng=np.random.default_rng(42))
    steps = law.sample(np.random.default_rng(42), size=n)
    path = np.concatenate([[0.0], np.cumsum(steps)])
    assert summary.end == pytest.approx(path[-1], abs=1e-12)
    assert summary.high == pytest.approx(path.max(), abs=1e-12)
    assert summary.low == pytest.approx(path.min(), abs=1e-12)
    assert summary.argmax == int(path.argmax())
    assert summary.log_sum_exp_neg == pytest.approx(
        math.log(np.exp(-path).sum()), rel=1e-12
    )
    assert summary.log_sum_exp_gap == pytest.approx(
        math.log(np.exp(path - path.max()).sum()), rel=1e-12
    )
    assert summary.log_h == pytest.approx(
        math.log(np.exp(path - path[-1]).sum()), rel=1e-12
    )
    assert summary.h == pytest.approx(math.exp(summary.log_h))


def test_extrema_include_the_origin():
    # a strictly rising path still reports low = S_0 = 0
    law = rademacher_law()
    for seed in range(30):
        s = simulate_walk(law, 5, rng=np.random.default_rng(seed))
        assert s.low <= 0.0 <= s.high


def test_rademacher_survival_frozen_fractions():
    """Exact ballot counts: P(low >= 0) = 1/2 at n = 2 and 6/16 at n = 4."""
    law = rademacher_law()
    rng = np.random.default_rng(77)
    for n, p_true in ((2, 0.5), (4, 6.0 / 16.0)):
        hits = sum(
            simulate_walk(law, n, rng=rng).low >= 0.0 for _ in range(40_000)
        )
        phat = hits / 40_000
        se = math.sqrt(p_true * (1.0 - p_true) / 40_000)
        assert abs(phat - p_true) <= 3.0 * se, (n, phat, p_true)
