"""Inequality probes: catalog integrity and a few cheap end-to-end runs.

The full catalog at production budget belongs to the acceptance suite;
here we check the plumbing — names, modes, grids, skip handling, report
shapes — plus two fast probes at a reduced budget with frozen seeds.
"""

import numpy as np
import pytest

from gwtwalk.onedim.inequalities import (
    SLOPE_TOL,
    ProbeResult,
    inequality_probe,
    probe_catalog,
    run_probe_catalog,
)
from gwtwalk.onedim.laws import gaussian_law


def test_catalog_size_and_uniqueness():
    names = probe_catalog()
    assert len(names) >= 15
    assert len(set(names)) == len(names)
    for name in ("stay-above", "stay-below", "final-equals-max"):
        assert name in names


def test_slope_tolerance_frozen():
    assert SLOPE_TOL == 0.1


def test_unknown_probe_name():
    with pytest.raises(KeyError, match="probe_catalog"):
        inequality_probe("no-such-inequality")


def test_stay_above_probe_small_budget():
    result = inequality_probe(
        "stay-above", rng=np.random.default_rng(11), budget_scale=0.2
    )
    assert isinstance(result, ProbeResult)
    assert result.mode == "power"
    assert result.slope_gate
    assert result.passed, result.summary_line()
    assert abs(result.slope) <= SLOPE_TOL
    assert len(result.points) >= 3
    for p in result.points:
        assert p.lhs >= 0.0
        assert p.implied > 0.0
        assert not p.skipped


def test_probe_report_shapes():
    result = inequality_probe(
        "stay-below", rng=np.random.default_rng(12), budget_scale=0.2
    )
    d = result.to_dict()
    assert set(d) == {
        "name", "statement", "mode", "law", "slope", "passed",
        "slope_gate", "reason", "points",
    }
    assert d["law"] == gaussian_law(1.0).name
    assert all(
        {"params", "x", "lhs", "implied", "hits"} <= set(p) for p in d["points"]
    )
    line = result.summary_line()
    assert line.startswith(("PASS", "FAIL"))
    assert "stay-below" in line


def test_named_subset_through_catalog_runner():
    results = run_probe_catalog(
        rng=np.random.default_rng(13),
        names=("stay-above", "stay-below"),
        budget_scale=0.15,
    )
    assert [r.name for r in results] == ["stay-above", "stay-below"]
    for r in results:
        assert r.passed, r.summary_line()


def test_statements_are_self_describing():
    # every catalog entry carries a human-readable inequality statement
    results = run_probe_catalog(
        rng=np.random.default_rng(14), names=("endpoint-window",),
        budget_scale=0.1,
    )
    assert results[0].statement
    assert len(results[0].statement) > 20
