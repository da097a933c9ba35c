"""Command-line front end: law checks, experiment runs, constants, probes.

Verbs map onto the package layers: ``verify-law`` checks an offspring law
against the boundary-case normalisation, ``simulate`` runs the replica
grid, ``constants`` estimates the one-dimensional walk constants and limit
constants, ``probe-inequalities`` runs the inequality catalog plus the
exact geometric-sum bound grid, ``fit`` and ``report`` analyse a results
table.  Any verb that performs a check exits nonzero when the check fails.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click
import numpy as np

from . import onedim
from .environment import law_from_config, verify_boundary_case
from .experiments import (
    ExperimentConfig,
    correlate_with_D,
    fit_exponent,
    load_results,
    run_experiment,
    stopping_line_table,
)
from .quenched import default_bound_grid, sweep_geo_sum_bounds

CONSTANTS_COLUMNS = ("name", "parameters", "value", "se", "samples", "law", "seed")


def _load_structured(path: Path) -> dict:
    """Read a TOML or JSON mapping, chosen by suffix (default TOML)."""
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def _tree_law_config(spec: str) -> dict:
    """Offspring-law spec: a named law, an inline JSON object, or a file."""
    if spec.strip().startswith("{"):
        return json.loads(spec)
    path = Path(spec)
    if path.suffix.lower() in (".json", ".toml"):
        return _load_structured(path)
    return {"kind": spec}


def _walk_law(spec: str) -> onedim.Walk1DLaw:
    """Increment-law spec for the one-dimensional layer: ``name`` or
    ``name:parameter`` with the constructor's single parameter."""
    name, _, arg = spec.partition(":")
    makers = {
        "gaussian": onedim.gaussian_law,
        "uniform": onedim.uniform_law,
        "mixture": onedim.mixture_law,
        "rademacher": onedim.rademacher_law,
        "tilted": onedim.tilted_gaussian_law,
    }
    if name not in makers:
        raise click.BadParameter(
            f"unknown law {name!r}; choose from {sorted(makers)}"
        )
    if arg:
        try:
            return makers[name](float(arg))
        except TypeError:
            raise click.BadParameter(f"law {name!r} takes no parameter")
    return makers[name]()


@click.group()
@click.version_option(package_name="gwtwalk")
def main():
    """Biased walks on random trees: simulation and verification tools."""


@main.command("verify-law")
@click.option("--law", "law_spec", default="canonical", show_default=True,
              help="offspring law: name, inline JSON, or config file")
@click.option("--samples", default=100_000, show_default=True,
              help="broods sampled for the Monte Carlo probes")
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="emit the report as JSON")
def verify_law(law_spec, samples, seed, as_json):
    """Check an offspring law against the boundary-case assumptions."""
    law = law_from_config(_tree_law_config(law_spec))
    report = verify_boundary_case(
        law, sample_count=samples, rng=np.random.default_rng(seed)
    )
    if as_json:
        payload = {
            "passed": report.passed,
            "additive_mean": report.additive_mean,
            "derivative_mean": report.derivative_mean,
            "sigma2": report.sigma2,
            "mean_offspring": report.mean_offspring,
            "analytic": report.analytic,
            "reasons": report.reasons,
        }
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(str(report))
    if not report.passed:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="experiment config file (TOML or JSON)")
@click.option("--theta", "thetas", multiple=True, type=float,
              help="override the config's theta list")
@click.option("--n", "n_grid", multiple=True, type=int,
              help="override the config's n grid")
@click.option("--replicas", type=int, default=None)
@click.option("--depth", type=int, default=None, help="martingale horizon M")
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", "output_dir", type=click.Path(path_type=Path), default=None,
              help="directory for results.csv + metadata.json")
def simulate(config_path, thetas, n_grid, replicas, depth, seed, workers, output_dir):
    """Run the replica grid: walks, thresholds, martingales, CSV out."""
    raw = _load_structured(config_path) if config_path else {}
    overrides = {
        "thetas": tuple(thetas) or None,
        "n_grid": tuple(n_grid) or None,
        "replicas": replicas,
        "martingale_depth": depth,
        "base_seed": seed,
        "workers": workers,
        "output_dir": str(output_dir) if output_dir else None,
    }
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    config = ExperimentConfig.from_dict(raw)
    results = run_experiment(config)
    truncated = sum(r.walk_truncated for r in results)
    click.echo(
        f"{len(results)} rows over thetas={list(config.thetas)} "
        f"n={list(config.n_grid)} replicas={config.replicas}"
        + (f"; {truncated} truncated" if truncated else "")
    )
    if config.output_dir:
        click.echo(f"wrote {Path(config.output_dir) / 'results.csv'}")


def _constant_rows(estimates: dict, law_name: str, seed: int) -> list[list]:
    rows = []
    for name, est in estimates.items():
        rows.append([
            name,
            json.dumps(est.params, sort_keys=True),
            repr(est.value),
            repr(est.se),
            est.samples,
            law_name,
            seed,
        ])
    return rows


@main.command()
@click.option("--law", "law_spec", default="gaussian", show_default=True,
              help="increment law, e.g. gaussian, gaussian:0.5, mixture:0.25")
@click.option("--theta", "thetas", multiple=True, type=float, default=(0.5,),
              show_default=True, help="theta values for the limit constants")
@click.option("--seed", default=0, show_default=True)
@click.option("--survival-attempts", default=2_000_000, show_default=True)
@click.option("--replicas", default=40_000, show_default=True,
              help="survivor paths behind each conditioned estimator")
@click.option("--horizon", default=10_000, show_default=True,
              help="walk length n for the conditioned ensembles")
@click.option("--skip-limits", is_flag=True,
              help="only the fluctuation constants, no limit-constant quadratures")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="CSV output path")
def constants(law_spec, thetas, seed, survival_attempts, replicas, horizon,
              skip_limits, out_path):
    """Estimate fluctuation and limit constants; check the product identity."""
    law = _walk_law(law_spec)
    rng = np.random.default_rng(seed)
    wc = onedim.estimate_constants(law, attempts=survival_attempts, rng=rng)
    estimates = {
        "c_plus": wc.c_plus,
        "c_minus": wc.c_minus,
        "c_renewal": wc.c_R,
        "sigma2": wc.sigma2_hat,
    }
    identity = wc.product_identity()
    click.echo(
        f"c_R * c_+ = {identity['product']:.4f} +/- {identity['product_se']:.4f} "
        f"(target {identity['target']:.4f}, rel err {identity['rel_err']:.2%})"
    )

    failed = not identity["within_5pct"]
    if not skip_limits and not law.lattice:
        ensemble = onedim.collect_survivors(
            law, n=horizon, target=replicas, rng=rng.spawn(1)[0]
        )
        for theta in thetas:
            lc = onedim.limit_constants(
                theta, law, ensemble=ensemble, constants=wc, rng=rng.spawn(1)[0]
            )
            suffix = f"(theta={theta})"
            estimates[f"lambda0 {suffix}"] = lc.lambda0
            estimates[f"lambda1-quadrature {suffix}"] = lc.lambda1_route_a
            estimates[f"lambda1-product {suffix}"] = lc.lambda1_route_b
            estimates[f"lambda-total {suffix}"] = lc.total
            click.echo(
                f"theta={theta}: lambda0={lc.lambda0.value:.4f}"
                f"+/-{lc.lambda0.se:.4f}  "
                f"lambda1: {lc.lambda1_route_a.value:.4f} (quadrature) vs "
                f"{lc.lambda1_route_b.value:.4f} (product), "
                f"routes agree: {lc.routes_agree}  "
                f"total={lc.total.value:.4f}+/-{lc.total.se:.4f}"
            )
            failed = failed or not lc.routes_agree
    elif not skip_limits:
        click.echo(
            "limit constants skipped: conditioned estimators exclude lattice laws"
        )

    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CONSTANTS_COLUMNS)
            writer.writerows(_constant_rows(estimates, law.name, seed))
        click.echo(f"wrote {out_path}")
    if failed:
        sys.exit(1)


@main.command("probe-inequalities")
@click.option("--law", "law_spec", default="gaussian", show_default=True)
@click.option("--budget-scale", default=1.0, show_default=True)
@click.option("--name", "names", multiple=True,
              help="probe subset (default: the whole catalog)")
@click.option("--seed", default=0, show_default=True)
@click.option("--skip-geo-grid", is_flag=True,
              help="skip the exact geometric-sum bound grid")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="JSON report path")
def probe_inequalities(law_spec, budget_scale, names, seed, skip_geo_grid, out_path):
    """Run the conditioned-walk inequality catalog and exact bound grid."""
    law = _walk_law(law_spec)
    results = onedim.run_probe_catalog(
        law=law,
        rng=np.random.default_rng(seed),
        names=names or None,
        budget_scale=budget_scale,
    )
    for result in results:
        click.echo(result.summary_line())
    n_pass = sum(r.passed for r in results)
    click.echo(f"{n_pass}/{len(results)} probes passed")
    failed = n_pass < len(results)

    geo_report = None
    if not skip_geo_grid:
        reports = sweep_geo_sum_bounds(default_bound_grid())
        holds = [r.lower_holds for r in reports]
        positive = [
            r.implied_c is None or r.implied_c > 0.0 for r in reports
        ]
        geo_report = {
            "points": len(reports),
            "lower_bound_holds": all(holds),
            "implied_constants_positive": all(positive),
        }
        click.echo(
            f"geometric-sum grid: {len(reports)} points, "
            f"lower bound holds: {all(holds)}, "
            f"implied upper constants positive: {all(positive)}"
        )
        failed = failed or not (all(holds) and all(positive))

    if out_path is not None:
        payload = {
            "law": law.name,
            "budget_scale": budget_scale,
            "seed": seed,
            "probes": [r.to_dict() for r in results],
            "passed": n_pass,
            "total": len(results),
            "geometric_sum_grid": geo_report,
        }
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")
    if failed:
        sys.exit(1)


@main.command()
@click.option("--results", "results_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--theta", "thetas", multiple=True, type=float,
              help="default: every theta present in the table")
@click.option("--min-points", default=4, show_default=True,
              help="smallest n-grid the fit will accept")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
def fit(results_path, thetas, min_points, out_path):
    """Fit the heavy-range scaling exponent from a results table."""
    results = load_results(results_path)
    present = sorted({r.theta for r in results})
    targets = list(thetas) if thetas else present
    fits = []
    for theta in targets:
        try:
            f = fit_exponent(results, theta, min_points=min_points)
        except ValueError as exc:
            raise click.ClickException(f"theta={theta:g}: {exc}")
        fits.append(f)
        click.echo(
            f"theta={theta:g}: slope {f.slope:+.4f} +/- {f.slope_se:.4f}  "
            f"(expected trend 1 - theta = {1 - theta:g}; "
            f"{f.rows_used} rows, {f.rows_dropped} dropped)"
        )
    if out_path is not None:
        payload = [
            {"theta": f.theta, "slope": f.slope, "slope_se": f.slope_se,
             "intercept": f.intercept, "n_values": list(f.n_values),
             "rows_used": f.rows_used, "rows_dropped": f.rows_dropped}
            for f in fits
        ]
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--results", "results_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--correlation-n", type=int, default=None,
              help="n for the martingale regression (default: largest with "
                   ">= 30 clean environments)")
@click.option("--correlation-theta", type=float, default=None)
@click.option("--constants", "constants_path",
              type=click.Path(exists=True, path_type=Path), default=None,
              help="constants CSV whose quadrature values are quoted alongside")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
def report(results_path, correlation_n, correlation_theta, constants_path, out_path):
    """Summarise a results table: fits, shares, hit rates, pairing.

    The walk table and the quadrature constants are deliberately separate
    routes: desk-scale walks resolve the scaling trend and the martingale
    pairing, while the limit constants come from the one-dimensional
    quadratures; the report never conflates the two.
    """
    results = load_results(results_path)
    thetas = sorted({r.theta for r in results})
    payload: dict = {"rows": len(results), "thetas": thetas}

    payload["fits"] = []
    for theta in thetas:
        try:
            f = fit_exponent(results, theta)
        except ValueError as exc:
            click.echo(f"theta={theta:g}: fit unavailable ({exc})")
            continue
        payload["fits"].append(
            {"theta": theta, "slope": f.slope, "slope_se": f.slope_se}
        )
        click.echo(f"theta={theta:g}: slope {f.slope:+.4f} +/- {f.slope_se:.4f}")

    shares = []
    for theta in thetas:
        rows = [r for r in results if r.theta == theta and not r.walk_truncated]
        by_n: dict[int, list[float]] = {}
        for r in rows:
            if r.heavy_range > 0:
                by_n.setdefault(r.n, []).append(r.heavy_one / r.heavy_range)
        for n in sorted(by_n):
            shares.append(
                {"theta": theta, "n": n,
                 "one_excursion_share": float(np.mean(by_n[n]))}
            )
    payload["one_excursion_shares"] = shares

    hit_table = stopping_line_table(results)
    payload["stopping_line"] = hit_table
    for row in hit_table:
        click.echo(
            f"stopping line at n={row['n']}: {row['hits']}/{row['total']} hits "
            f"[{row['lo']:.4f}, {row['hi']:.4f}]"
        )

    clean = [r for r in results if not r.walk_truncated]
    by_key: dict[tuple[float, int], int] = {}
    for r in clean:
        key = (r.theta, r.n)
        by_key[key] = by_key.get(key, 0) + 1
    candidates = [k for k, c in by_key.items() if c >= 30]
    if correlation_n is not None or candidates:
        if correlation_n is None:
            theta_c, n_c = max(candidates, key=lambda k: (k[1], k[0]))
        else:
            n_c = correlation_n
            theta_c = correlation_theta if correlation_theta is not None else thetas[0]
        corr = correlate_with_D(results, theta_c, n_c)
        payload["martingale_regression"] = {
            "theta": corr.theta, "n": corr.n, "slope": corr.slope,
            "intercept": corr.intercept, "intercept_se": corr.intercept_se,
            "correlation": corr.correlation, "environments": corr.environments,
        }
        click.echo(
            f"martingale pairing at (theta={theta_c:g}, n={n_c}): "
            f"correlation {corr.correlation:+.3f} over {corr.environments} "
            f"environments"
        )
    else:
        click.echo("martingale pairing skipped: no (theta, n) with >= 30 "
                   "clean environments")

    if constants_path is not None:
        with open(constants_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        quads = [r for r in rows if r["name"].startswith("lambda")]
        payload["quadrature_constants"] = quads
        for r in quads:
            click.echo(
                f"quadrature {r['name']}: {float(r['value']):.4f} "
                f"+/- {float(r['se']):.4f}  (separate route; not fitted "
                f"from walks)"
            )

    if out_path is not None:
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
