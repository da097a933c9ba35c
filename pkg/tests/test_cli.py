"""Command-line verbs, exercised through click's test runner."""

import csv
import json

import pytest
from click.testing import CliRunner

from gwtwalk.cli import (
    CONSTANTS_COLUMNS,
    _tree_law_config,
    _walk_law,
    main,
)
from gwtwalk.experiments import load_results


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def results_csv(tmp_path_factory):
    """A tiny simulate run shared by the fit/report tests."""
    out_dir = tmp_path_factory.mktemp("runout")
    cfg_path = out_dir / "exp.toml"
    cfg_path.write_text(
        "thetas = [0.5]\n"
        "n_grid = [4, 8]\n"
        "replicas = 2\n"
        "martingale_depth = 2\n"
        "base_seed = 3\n"
    )
    result = CliRunner().invoke(
        main,
        ["simulate", "--config", str(cfg_path), "--out", str(out_dir / "run")],
    )
    assert result.exit_code == 0, result.output
    return out_dir / "run" / "results.csv"


# ---------------------------------------------------------------------------
# spec parsing helpers
# ---------------------------------------------------------------------------

def test_tree_law_spec_forms(tmp_path):
    assert _tree_law_config("canonical") == {"kind": "canonical"}
    inline = _tree_law_config('{"kind": "gaussian-binary", "mean": 1.0, "variance": 2.0}')
    assert inline["kind"] == "gaussian-binary"
    cfg = tmp_path / "law.json"
    cfg.write_text('{"kind": "canonical"}')
    assert _tree_law_config(str(cfg)) == {"kind": "canonical"}


def test_walk_law_spec_forms():
    assert _walk_law("gaussian:0.5").p0 == 0.5
    assert _walk_law("mixture").name.startswith("mixture")
    assert _walk_law("rademacher").lattice
    import click
    with pytest.raises(click.BadParameter, match="unknown law"):
        _walk_law("levy")
    with pytest.raises(click.BadParameter, match="no parameter"):
        _walk_law("rademacher:2")


# ---------------------------------------------------------------------------
# verify-law
# ---------------------------------------------------------------------------

def test_verify_law_canonical(runner):
    result = runner.invoke(main, ["verify-law"])
    assert result.exit_code == 0, result.output
    assert "PASS" in result.output


def test_verify_law_json(runner):
    result = runner.invoke(main, ["verify-law", "--json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["passed"] is True
    assert payload["analytic"] is True
    assert abs(payload["additive_mean"] - 1.0) < 1e-9


def test_verify_law_rejects_off_boundary(runner):
    spec = '{"kind": "gaussian-binary", "mean": 1.0, "variance": 1.0}'
    result = runner.invoke(main, ["verify-law", "--law", spec])
    assert result.exit_code == 1
    assert "FAIL" in result.output


# ---------------------------------------------------------------------------
# simulate / fit / report
# ---------------------------------------------------------------------------

def test_simulate_wrote_loadable_table(results_csv):
    rows = load_results(results_csv)
    assert len(rows) == 4          # 1 theta x 2 n x 2 replicas
    assert {r.n for r in rows} == {4, 8}
    meta = json.loads((results_csv.parent / "metadata.json").read_text())
    assert meta["config"]["base_seed"] == 3


def test_fit_verb(runner, results_csv, tmp_path):
    out = tmp_path / "fits.json"
    result = runner.invoke(
        main,
        ["fit", "--results", str(results_csv), "--min-points", "2",
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "slope" in result.output
    payload = json.loads(out.read_text())
    assert len(payload) == 1
    assert payload[0]["theta"] == 0.5
    assert payload[0]["n_values"] == [4, 8]


def test_fit_verb_reports_thin_grids_cleanly(runner, results_csv):
    result = runner.invoke(main, ["fit", "--results", str(results_csv)])
    assert result.exit_code != 0
    assert "grid points" in result.output + (result.stderr or "")


def test_report_verb(runner, results_csv, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(
        main, ["report", "--results", str(results_csv), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "pairing skipped" in result.output   # 2 replicas << 30 environments
    payload = json.loads(out.read_text())
    assert payload["rows"] == 4
    assert payload["thetas"] == [0.5]
    assert payload["stopping_line"]
    assert all(
        0.0 <= s["one_excursion_share"] <= 1.0
        for s in payload["one_excursion_shares"]
    )


# ---------------------------------------------------------------------------
# probe-inequalities
# ---------------------------------------------------------------------------

def test_probe_subset_without_grid(runner, tmp_path):
    out = tmp_path / "probes.json"
    result = runner.invoke(
        main,
        ["probe-inequalities", "--name", "stay-above", "--budget-scale",
         "0.15", "--seed", "3", "--skip-geo-grid", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "1/1 probes passed" in result.output
    payload = json.loads(out.read_text())
    assert set(payload) == {
        "law", "budget_scale", "seed", "probes", "passed", "total",
        "geometric_sum_grid",
    }
    assert payload["geometric_sum_grid"] is None
    assert payload["probes"][0]["name"] == "stay-above"


def test_probe_geo_grid(runner):
    result = runner.invoke(
        main,
        ["probe-inequalities", "--name", "stay-above", "--budget-scale",
         "0.15", "--seed", "3"],
    )
    assert result.exit_code == 0, result.output
    assert "27 points" in result.output
    assert "lower bound holds: True" in result.output


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def test_constants_skip_limits_writes_csv(runner, tmp_path):
    out = tmp_path / "constants.csv"
    result = runner.invoke(
        main,
        ["constants", "--law", "gaussian", "--skip-limits",
         "--survival-attempts", "200000", "--seed", "0", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "c_R * c_+" in result.output
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CONSTANTS_COLUMNS
    names = [r[0] for r in rows[1:]]
    assert names == ["c_plus", "c_minus", "c_renewal", "sigma2"]
    for r in rows[1:]:
        assert r[5] == "gaussian(sigma=1)"
        assert float(r[2]) > 0.0
