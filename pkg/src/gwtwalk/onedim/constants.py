"""Fluctuation constants of a centred walk: survival, ladder, renewal.

Three constants govern every limit formula downstream:

* ``c_plus``:  ``P(min_{k<=n} S_k >= 0) ~ c_plus / sqrt(n)``,
* ``c_minus``: ``P(max_{k<=n} S_k <= 0) ~ c_minus / sqrt(n)``,
* ``c_R``:     the linear growth rate of the renewal function of strict
  descending ladder heights, ``R(u)/u -> c_R``.

They are tied together by the identity ``c_R * c_plus = sqrt(2/(pi*sigma^2))``,
which doubles as an end-to-end consistency check of the estimators here.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterator, Optional, Sequence

import numpy as np

from gwtwalk.estimates import ConstantEstimate
from gwtwalk.onedim import _kernels
from gwtwalk.onedim.laws import Walk1DLaw


def _child_rngs(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    """Spawn ``k`` statistically independent child generators."""
    return rng.spawn(k)


@dataclasses.dataclass
class LadderPool:
    """I.i.d. strict descending ladder heights harvested per batch.

    ``heights`` concatenates the batches; ``batch_slices`` records the
    ``(start, stop)`` extent of each batch so that any derived statistic
    can be recomputed batch by batch.  Batches come from independent
    walks, so they are exactly independent.
    """

    law_name: str
    heights: np.ndarray
    batch_slices: list
    steps_per_batch: int

    @property
    def n_batches(self) -> int:
        return len(self.batch_slices)

    def batches(self) -> Iterator[np.ndarray]:
        for start, stop in self.batch_slices:
            yield self.heights[start:stop]

    def mean_height(self) -> ConstantEstimate:
        """Mean ladder height, with a batch-means SE."""
        batch_means = [float(b.mean()) for b in self.batches()]
        return ConstantEstimate.from_batches(
            batch_means,
            value=float(self.heights.mean()),
            samples=int(self.heights.size),
            method="ladder-pool-mean",
            params={"law": self.law_name},
        )


def harvest_ladder_heights(
    law: Walk1DLaw,
    rng: Optional[np.random.Generator] = None,
    batches: int = 10,
    steps_per_batch: int = 20_000_000,
) -> LadderPool:
    """Run ``batches`` independent long walks and collect ladder heights.

    The number of strict descending ladder points in ``L`` steps grows
    like ``sqrt(L)``, so the pool size is set by the step budget rather
    than requested directly.
    """
    if rng is None:
        rng = np.random.default_rng()
    if batches < 2:
        raise ValueError("need at least two batches for error estimates")
    kind, p0, p1 = law.kernel_params()
    # Generous per-batch cap: ladder points are ~ sqrt(steps), x40 margin.
    cap = max(1024, int(40 * math.sqrt(steps_per_batch)))
    buf = np.empty(cap)
    chunks = []
    slices = []
    start = 0
    for child in _child_rngs(rng, batches):
        count = _kernels.ladder_heights(steps_per_batch, kind, p0, p1, buf, child)
        if count < 16:
            raise RuntimeError(
                f"ladder harvest produced only {count} heights in "
                f"{steps_per_batch} steps; law {law.name!r} looks degenerate"
            )
        chunks.append(buf[:count].copy())
        slices.append((start, start + count))
        start += count
    return LadderPool(
        law_name=law.name,
        heights=np.concatenate(chunks),
        batch_slices=slices,
        steps_per_batch=steps_per_batch,
    )


def _renewal_counts(
    heights: np.ndarray, u: float, replicas: int, rng: np.random.Generator
) -> float:
    """Mean number of ladder renewals with partial sum <= ``u``.

    Simulates the renewal process by resampling heights from the pool
    until the running sum exits ``[0, u]``.  Vectorised: all replicas
    advance one renewal per round, finished rows drop out.
    """
    if u < 0:
        raise ValueError("u must be nonnegative")
    if u == 0.0:
        # Ladder heights are strictly positive: the first renewal already
        # exits, so only the k=0 term of the renewal function remains.
        return 0.0
    totals = np.zeros(replicas)
    counts = np.zeros(replicas)
    active = np.arange(replicas)
    while active.size:
        draw = rng.choice(heights, size=active.size, replace=True)
        totals[active] += draw
        inside = totals[active] <= u
        counts[active[inside]] += 1.0
        active = active[inside]
    return float(counts.mean())


def renewal_function(
    law: Walk1DLaw,
    u: float,
    replicas: int = 4000,
    rng: Optional[np.random.Generator] = None,
    pool: Optional[LadderPool] = None,
) -> ConstantEstimate:
    """Estimate the strict-descending-ladder renewal function ``R(u)``.

    ``R(u)`` counts the expected number of strict descending ladder
    points with depth at most ``u`` below the start, including the
    ``k = 0`` term which contributes 1.  ``R(0) = 1`` exactly because
    strict ladder heights are positive.
    """
    if rng is None:
        rng = np.random.default_rng()
    if pool is None:
        pool = harvest_ladder_heights(law, rng, steps_per_batch=2_000_000)
    if u == 0.0:
        return ConstantEstimate(
            value=1.0,
            se=0.0,
            samples=0,
            method="ladder-renewal",
            params={"u": 0.0, "law": law.name},
            notes="exact: strict ladder heights are positive",
        )
    per_batch = max(200, replicas // pool.n_batches)
    children = _child_rngs(rng, pool.n_batches)
    batch_vals = [
        1.0 + _renewal_counts(b, u, per_batch, child)
        for b, child in zip(pool.batches(), children)
    ]
    return ConstantEstimate.from_batches(
        batch_vals,
        samples=per_batch * pool.n_batches,
        method="ladder-renewal",
        params={"u": u, "law": law.name, "pool_heights": int(pool.heights.size)},
    )


def _survival_curve(
    law: Walk1DLaw,
    n_grid: Sequence[int],
    attempts: int,
    flip: bool,
    rng: np.random.Generator,
    batches: int = 10,
) -> np.ndarray:
    """``p_hat[b, i] = P(S stays >= 0 up to n_grid[i])`` per batch."""
    kind, p0, p1 = law.kernel_params()
    per_batch = max(100, attempts // batches)
    out = np.empty((batches, len(n_grid)))
    for b, child in enumerate(_child_rngs(rng, batches)):
        for i, n in enumerate(n_grid):
            alive = _kernels.survival_count(
                per_batch, int(n), kind, p0, p1, flip, 0.0, child
            )
            out[b, i] = alive / per_batch
    return out


def _extrapolate_sqrtn(n_grid: Sequence[int], p_hat: np.ndarray) -> float:
    """Intercept of ``sqrt(n) * p_hat`` against ``1/sqrt(n)``.

    The survival probability satisfies ``sqrt(n) * P = c + O(1/sqrt(n))``,
    so a linear fit in ``1/sqrt(n)`` strips the leading finite-size bias.
    """
    x = 1.0 / np.sqrt(np.asarray(n_grid, dtype=float))
    y = np.sqrt(np.asarray(n_grid, dtype=float)) * p_hat
    coeffs = np.polynomial.polynomial.polyfit(x, y, 1)
    return float(coeffs[0])


def estimate_survival_constant(
    law: Walk1DLaw,
    n_grid: Optional[Sequence[int]] = None,
    attempts: int = 2_000_000,
    rng: Optional[np.random.Generator] = None,
    mirrored: bool = False,
) -> ConstantEstimate:
    """Estimate ``c_plus`` (or ``c_minus`` with ``mirrored=True``).

    Runs kill-on-breach survival counts on an ascending ``n`` grid and
    extrapolates ``sqrt(n) * P`` to ``n = infinity``.
    """
    if rng is None:
        rng = np.random.default_rng()
    if n_grid is None:
        n_grid = (2_500, 5_000, 10_000, 20_000)
    if list(n_grid) != sorted(set(int(n) for n in n_grid)) or len(n_grid) < 2:
        raise ValueError("n_grid must be strictly ascending with >= 2 points")
    p_hat = _survival_curve(law, n_grid, attempts, mirrored, rng)
    batch_vals = [_extrapolate_sqrtn(n_grid, p_hat[b]) for b in range(p_hat.shape[0])]
    pooled = _extrapolate_sqrtn(n_grid, p_hat.mean(axis=0))
    est = ConstantEstimate.from_batches(
        batch_vals,
        value=pooled,
        samples=int(attempts),
        method="survival-extrapolation",
        params={
            "law": law.name,
            "n_grid": [int(n) for n in n_grid],
            "mirrored": mirrored,
        },
    )
    if est.se > 0.2 * abs(est.value):
        est.notes = "extrapolation poorly converged: SE exceeds 20% of value"
    return est


@dataclasses.dataclass
class WalkConstants:
    """Bundle of the fluctuation constants of one law, with provenance."""

    law: Walk1DLaw
    c_plus: ConstantEstimate
    c_minus: ConstantEstimate
    c_R: ConstantEstimate
    sigma2_hat: ConstantEstimate
    pool: LadderPool

    def product_identity(self) -> dict:
        """Check ``c_R * c_plus`` against ``sqrt(2/(pi*sigma^2))``.

        Uses the analytic variance; the batch values of both factors are
        multiplied pairwise so the product's SE reflects the full
        pipeline.
        """
        target = math.sqrt(2.0 / (math.pi * self.law.sigma2))
        prod_batches = [
            a * b
            for a, b in zip(self.c_R.batch_values, self.c_plus.batch_values)
        ]
        prod = ConstantEstimate.from_batches(
            prod_batches,
            value=self.c_R.value * self.c_plus.value,
            method="product-identity",
            params={"law": self.law.name},
        )
        rel_err = abs(prod.value - target) / target
        return {
            "law": self.law.name,
            "product": prod.value,
            "product_se": prod.se,
            "target": target,
            "rel_err": rel_err,
            "within_5pct": rel_err <= 0.05,
        }


def estimate_constants(
    law: Walk1DLaw,
    n_grid: Optional[Sequence[int]] = None,
    attempts: int = 2_000_000,
    rng: Optional[np.random.Generator] = None,
    ladder_steps_per_batch: int = 20_000_000,
    u_grid: Optional[Sequence[float]] = None,
    variance_samples: int = 1_000_000,
) -> WalkConstants:
    """Estimate ``c_plus``, ``c_minus``, ``c_R`` and the step variance.

    ``c_R`` comes from the slope of the renewal function over ``u_grid``
    (default ``20..60`` standard deviations); the elementary-renewal
    cross-check ``1/E[height]`` is recorded in the estimate's notes.
    """
    if rng is None:
        rng = np.random.default_rng()
    r_survival, r_mirror, r_pool, r_renewal, r_var = _child_rngs(rng, 5)

    c_plus = estimate_survival_constant(law, n_grid, attempts, r_survival)
    c_minus = estimate_survival_constant(
        law, n_grid, attempts, r_mirror, mirrored=True
    )

    pool = harvest_ladder_heights(
        law, r_pool, steps_per_batch=ladder_steps_per_batch
    )
    if u_grid is None:
        s = law.sigma
        u_grid = tuple(s * v for v in (20.0, 30.0, 40.0, 50.0, 60.0))
    children = _child_rngs(r_renewal, pool.n_batches)
    slope_batches = []
    u_arr = np.asarray(u_grid, dtype=float)
    for b, child in zip(pool.batches(), children):
        r_vals = np.array(
            [1.0 + _renewal_counts(b, u, 2000, child) for u in u_arr]
        )
        slope = np.polynomial.polynomial.polyfit(u_arr, r_vals, 1)[1]
        slope_batches.append(float(slope))
    mean_h = pool.mean_height()
    c_R = ConstantEstimate.from_batches(
        slope_batches,
        samples=int(pool.heights.size),
        method="renewal-slope",
        params={"law": law.name, "u_grid": [float(u) for u in u_grid]},
        notes=f"elementary-renewal cross-check 1/E[height] = {1.0 / mean_h.value:.6g}",
    )

    draws = law.sample(r_var, size=variance_samples)
    var = float(np.var(draws, ddof=1))
    m4 = float(np.mean((draws - draws.mean()) ** 4))
    sigma2_hat = ConstantEstimate(
        value=var,
        se=math.sqrt(max(m4 - var**2, 0.0) / variance_samples),
        samples=variance_samples,
        method="sample-variance",
        params={"law": law.name},
    )

    return WalkConstants(
        law=law,
        c_plus=c_plus,
        c_minus=c_minus,
        c_R=c_R,
        sigma2_hat=sigma2_hat,
        pool=pool,
    )


def product_identity_report(
    law: Walk1DLaw,
    constants: Optional[WalkConstants] = None,
    rng: Optional[np.random.Generator] = None,
    **kwargs,
) -> dict:
    """Convenience wrapper: estimate constants if needed, check identity."""
    if constants is None:
        constants = estimate_constants(law, rng=rng, **kwargs)
    return constants.product_identity()
