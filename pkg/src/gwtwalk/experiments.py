"""Seeded replica experiments over tree walks: scaling of the heavy range
and its pairing with the derivative martingale.

The driver runs one walk per (n, replica) cell of a grid, reads every
requested local-time threshold off the same record, completes the
environment's martingales at a fixed horizon, and emits a flat, sorted,
re-runnable table.  Analysis helpers fit the heavy-range scaling exponent
and regress the normalized range against the martingale value.

Seeds are derived per cell from ``(base_seed, n, replica)``, so the table
is byte-identical across reruns and independent of worker scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.stats

from .environment import Environment, PopulationCapError, law_from_config
from .estimates import ConstantEstimate
from .observables import (
    heavy_range_by_excursions,
    heavy_threshold,
    martingales_streamed,
    stopping_line_hit,
)
from .walker import StepCapPolicy, WalkRecord, run_n_excursions

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "RUN_RESULT_COLUMNS",
    "run_experiment",
    "load_results",
    "fit_exponent",
    "correlate_with_D",
    "ExponentFit",
    "CorrelationResult",
    "wilson_interval",
    "stopping_line_table",
]


DEFAULT_N_GRID = tuple(2 ** p for p in range(10, 18))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a replica grid run depends on.

    ``law`` is a structured law config (see :func:`law_from_config`);
    ``barrier_a`` and ``barrier_gamma`` are the offset and window constants
    used when reports slice visited vertices by barrier membership — they do
    not affect the walk itself.
    """

    law: dict = field(default_factory=lambda: {"kind": "canonical"})
    thetas: tuple[float, ...] = (0.25, 0.5, 0.75)
    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    replicas: int = 50
    martingale_depth: int = 25
    population_cap: int = 10_000_000
    max_steps_per_excursion: int = 10 ** 8
    max_steps_total: int = 10 ** 9
    barrier_a: float = 4.0
    barrier_gamma: float = 1.0
    output_dir: str | None = None
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for theta in self.thetas:
            if not (0.0 < theta < 1.0):
                raise ValueError(f"theta={theta} outside (0, 1)")
        if not self.thetas:
            raise ValueError("need at least one theta")
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(n < 2 for n in grid):
            raise ValueError("n grid entries must be >= 2")
        if any(a >= b for a, b in zip(grid, grid[1:])):
            raise ValueError("n grid must be strictly ascending")
        if self.replicas < 1:
            raise ValueError("replica count must be >= 1")
        if self.martingale_depth < 0:
            raise ValueError("martingale depth must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cleaned = dict(raw)
        for key in ("thetas", "n_grid"):
            if key in cleaned:
                cleaned[key] = tuple(cleaned[key])
        return cls(**cleaned)


@dataclass(frozen=True)
class RunResult:
    """One (theta, n, replica) cell of the experiment table.

    ``heavy_range`` counts vertices with edge local time >= k at the end of
    the n-th excursion; ``heavy_one`` of them were visited by exactly one
    excursion and ``heavy_multi`` by two or more, so the two parts always
    sum to ``heavy_range``.  Truncated rows keep whatever tallies existed
    when a budget stopped the walk and are excluded from fits.
    """

    theta: float
    n: int
    k: int
    replica: int
    heavy_range: int
    heavy_one: int
    heavy_multi: int
    tau: int
    max_depth: int
    stopping_line_hit: bool
    walk_truncated: bool
    martingale_truncated: bool
    martingale_depth: int
    D_M: float
    W_M: float

    def normalized_range(self) -> float:
        """R / n^{1-theta}, the quantity whose limit is proportional to the
        derivative-martingale value."""
        return self.heavy_range / self.n ** (1.0 - self.theta)


RUN_RESULT_COLUMNS = tuple(f.name for f in dataclasses.fields(RunResult))

_BOOL_COLUMNS = ("stopping_line_hit", "walk_truncated", "martingale_truncated")
_INT_COLUMNS = (
    "n", "k", "replica", "heavy_range", "heavy_one", "heavy_multi",
    "tau", "max_depth", "martingale_depth",
)


def _replica_task(payload: tuple) -> list[RunResult]:
    """Run one (n, replica) cell: the walk, thresholds, and martingales."""
    (law_cfg, n, replica, base_seed, thetas, depth,
     population_cap, cap_excursion, cap_total) = payload
    ss = np.random.SeedSequence(entropy=(base_seed, n, replica))
    env_ss, walk_ss, mart_ss = ss.spawn(3)
    law = law_from_config(law_cfg)
    env = Environment(law, seed=np.random.default_rng(env_ss),
                      population_cap=population_cap)
    record = WalkRecord(env, rng=np.random.default_rng(walk_ss))
    policy = StepCapPolicy(
        max_steps_per_excursion=cap_excursion,
        max_steps_total=cap_total,
        on_breach="record-truncation",
    )
    try:
        run_n_excursions(record, n, policy)
    except PopulationCapError as exc:
        record.truncated = True
        record.truncation_reason = str(exc)

    mart = martingales_streamed(env, depth, rng=np.random.default_rng(mart_ss))
    m = mart.complete_to
    rows = []
    for theta in thetas:
        k = heavy_threshold(n, theta)
        by_excursions = heavy_range_by_excursions(record, k)
        heavy = sum(by_excursions.values())
        one = by_excursions.get(1, 0)
        rows.append(RunResult(
            theta=theta,
            n=n,
            k=k,
            replica=replica,
            heavy_range=heavy,
            heavy_one=one,
            heavy_multi=heavy - one,
            tau=record.tau,
            max_depth=record.max_depth_reached,
            stopping_line_hit=stopping_line_hit(record, float(n)),
            walk_truncated=record.truncated,
            martingale_truncated=mart.truncated or m < depth,
            martingale_depth=m,
            D_M=float(mart.D[m]),
            W_M=float(mart.W[m]),
        ))
    return rows


def run_experiment(config: ExperimentConfig) -> list[RunResult]:
    """Run the full replica grid and return the sorted result table.

    When ``config.output_dir`` is set, also writes ``results.csv`` and a
    ``metadata.json`` describing the configuration and column schema.  The
    output is deterministic for a fixed config: every cell derives its
    streams from ``(base_seed, n, replica)`` alone, so scheduling cannot
    reorder randomness.
    """
    payloads = [
        (config.law, n, replica, config.base_seed, config.thetas,
         config.martingale_depth, config.population_cap,
         config.max_steps_per_excursion, config.max_steps_total)
        for n in config.n_grid
        for replica in range(config.replicas)
    ]
    results: list[RunResult] = []
    if config.workers == 1:
        for payload in payloads:
            results.extend(_replica_task(payload))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for rows in pool.map(_replica_task, payloads, chunksize=1):
                results.extend(rows)
    results.sort(key=lambda r: (r.theta, r.n, r.replica))

    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(out / "results.csv", results)
        metadata = {
            "config": config.to_dict(),
            "columns": list(RUN_RESULT_COLUMNS),
            "rows": len(results),
            "truncated_rows": sum(r.walk_truncated for r in results),
        }
        (out / "metadata.json").write_text(
            json.dumps(metadata, indent=2, sort_keys=True) + "\n"
        )
    return results


def write_results_csv(path, results: Iterable[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_RESULT_COLUMNS)
        for row in results:
            writer.writerow(
                [repr(getattr(row, c)) if isinstance(getattr(row, c), float)
                 else getattr(row, c) for c in RUN_RESULT_COLUMNS]
            )


def load_results(path) -> list[RunResult]:
    """Read a results CSV back into RunResult rows (schema-checked)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RUN_RESULT_COLUMNS:
            raise ValueError(
                f"unexpected column header {reader.fieldnames!r}; "
                f"expected {list(RUN_RESULT_COLUMNS)}"
            )
        rows = []
        for rec in reader:
            kwargs = {}
            for key, raw in rec.items():
                if key in _BOOL_COLUMNS:
                    kwargs[key] = raw == "True"
                elif key in _INT_COLUMNS:
                    kwargs[key] = int(raw)
                else:
                    kwargs[key] = float(raw)
            rows.append(RunResult(**kwargs))
    return rows


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of replica-averaged log R against log n."""

    theta: float
    slope: float
    slope_se: float
    intercept: float
    n_values: tuple[int, ...]
    mean_log_range: tuple[float, ...]
    rows_used: int
    rows_dropped: int

    def as_estimate(self) -> ConstantEstimate:
        return ConstantEstimate(
            value=self.slope,
            se=self.slope_se,
            samples=self.rows_used,
            method="log-log-fit",
            params={"theta": self.theta, "n_grid": list(self.n_values)},
        )


def fit_exponent(
    results: Sequence[RunResult], theta: float, min_points: int = 4
) -> ExponentFit:
    """Fit the heavy-range scaling exponent at one theta.

    Truncated rows are dropped; every n with at least one clean replica
    contributes the mean of log R over its replicas; the fit needs at least
    ``min_points`` such grid points.  The slope's SE comes from the
    residuals of the averaged points.
    """
    rows = [r for r in results if r.theta == theta]
    if not rows:
        raise ValueError(f"no rows at theta={theta}")
    clean = [r for r in rows if not r.walk_truncated]
    dropped = len(rows) - len(clean)
    by_n: dict[int, list[float]] = {}
    for r in clean:
        by_n.setdefault(r.n, []).append(math.log(max(r.heavy_range, 1)))
    if len(by_n) < min_points:
        raise ValueError(
            f"need at least {min_points} grid points, have {len(by_n)}"
        )
    ns = sorted(by_n)
    x = np.log(ns)
    y = np.array([float(np.mean(by_n[n])) for n in ns])
    fit = scipy.stats.linregress(x, y)
    return ExponentFit(
        theta=theta,
        slope=float(fit.slope),
        slope_se=float(fit.stderr),
        intercept=float(fit.intercept),
        n_values=tuple(ns),
        mean_log_range=tuple(float(v) for v in y),
        rows_used=len(clean),
        rows_dropped=dropped,
    )


@dataclass(frozen=True)
class CorrelationResult:
    """Regression of the normalized heavy range on the martingale value."""

    theta: float
    n: int
    slope: float
    slope_se: float
    intercept: float
    intercept_se: float
    correlation: float
    environments: int
    permuted: bool

    def intercept_consistent_with_zero(self, tolerance_se: float = 3.0) -> bool:
        return abs(self.intercept) <= tolerance_se * self.intercept_se


def correlate_with_D(
    results: Sequence[RunResult],
    theta: float,
    n: int,
    min_environments: int = 30,
    permute_with: np.random.Generator | None = None,
) -> CorrelationResult:
    """Regress R/n^{1-theta} on D_M across environments at fixed (theta, n).

    The pairing is environment-level: each row's walk and martingale value
    come from the same tree.  Passing ``permute_with`` shuffles the
    martingale column first — the standard independence control, which
    should kill the correlation.
    """
    rows = [
        r for r in results
        if r.theta == theta and r.n == n and not r.walk_truncated
    ]
    if len(rows) < min_environments:
        raise ValueError(
            f"need >= {min_environments} clean environments at "
            f"(theta={theta}, n={n}), have {len(rows)}"
        )
    x = np.array([r.D_M for r in rows])
    y = np.array([r.normalized_range() for r in rows])
    if float(np.var(x)) <= 1e-12 * max(1.0, float(np.mean(x)) ** 2):
        raise ValueError("martingale values are (numerically) degenerate")
    permuted = permute_with is not None
    if permuted:
        x = permute_with.permutation(x)
    fit = scipy.stats.linregress(x, y)
    return CorrelationResult(
        theta=theta,
        n=n,
        slope=float(fit.slope),
        slope_se=float(fit.stderr),
        intercept=float(fit.intercept),
        intercept_se=float(fit.intercept_stderr),
        correlation=float(fit.rvalue),
        environments=len(rows),
        permuted=permuted,
    )


def wilson_interval(hits: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not (0 <= hits <= total):
        raise ValueError("hits must lie in [0, total]")
    p = hits / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total))
    return max(0.0, center - half), min(1.0, center + half)


def stopping_line_table(
    results: Sequence[RunResult], z: float = 1.96
) -> list[dict]:
    """Per-n stopping-line hit rates with Wilson intervals.

    One walk serves every theta, so rows are deduplicated to (n, replica)
    before counting.  Expected behaviour: the rate is non-increasing in n
    (the walk stays below the conductance line at its own horizon with
    growing probability), which downstream checks verify as an ordering of
    the intervals.
    """
    seen: dict[tuple[int, int], bool] = {}
    for r in results:
        seen[(r.n, r.replica)] = r.stopping_line_hit
    by_n: dict[int, list[bool]] = {}
    for (n, _), hit in seen.items():
        by_n.setdefault(n, []).append(hit)
    table = []
    for n in sorted(by_n):
        hits = sum(by_n[n])
        total = len(by_n[n])
        lo, hi = wilson_interval(hits, total, z)
        table.append(
            {"n": n, "hits": hits, "total": total,
             "rate": hits / total, "lo": lo, "hi": hi}
        )
    return table
