"""Exact quenched laws for excursion local times, and small-instance oracles.

For a vertex ``x`` at depth ``d`` with potential path ``V(y), y in [root, x]``,
the conductance sum ``H_x = sum_y e^{V(y)-V(x)}`` determines everything the
walk does on the edge ``(parent(x), x)`` during one excursion:

- the excursion hits ``x`` with probability ``a_x = e^{-V(x)} / H_x``
  (equivalently ``1 / sum_y e^{V(y)}``, independent of side branches);
- given a hit, further returns to ``x`` before the excursion ends follow a
  geometric law with continuation probability ``b_x = 1 - 1/H_x``.

So the single-excursion edge local time is a zero-inflated geometric, the
local time after ``n`` excursions is a sum of ``n`` i.i.d. copies, and the
number of visiting excursions is Binomial(n, a_x).  This module computes
those laws exactly (log domain where products underflow), provides an
independent linear-solver oracle for ``a_x``, and checks the tail bounds the
geometric-sum law satisfies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .environment import Environment
from .observables import PathStats, path_stats

__all__ = [
    "EdgeLaw",
    "edge_law",
    "absorption_solve",
    "SingleExcursionLaw",
    "single_excursion_law",
    "one_excursion_heavy_logprob",
    "one_excursion_heavy_prob",
    "GeoSumDistribution",
    "geo_sum_distribution",
    "GeoSumBoundReport",
    "check_geo_sum_bounds",
    "sweep_geo_sum_bounds",
    "default_bound_grid",
]


# ---------------------------------------------------------------------------
# edge law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeLaw:
    """Hitting / continuation probabilities of one edge under one excursion.

    ``a = e^{-V}/H`` (hit probability from the root, before returning to the
    anchor), ``b = 1 - 1/H`` (probability a visit is followed by another
    visit).  The root edge is the degenerate case ``a = 1, b = 0``.
    """

    a: float
    b: float
    H: float
    log_a: float
    log_b: float

    def __post_init__(self):
        if not (0.0 < self.a <= 1.0):
            raise ValueError(f"a must be in (0, 1], got {self.a}")
        if not (0.0 <= self.b < 1.0):
            raise ValueError(f"b must be in [0, 1), got {self.b}")


def edge_law(stats: PathStats) -> EdgeLaw:
    """Closed-form (a, b, H) from the path functionals of one vertex."""
    log_H = stats.log_H
    log_a = -stats.V - log_H
    b = -math.expm1(-log_H)  # 1 - 1/H, exact near H = 1
    return EdgeLaw(
        a=math.exp(log_a),
        b=b,
        H=math.exp(log_H),
        log_a=log_a,
        log_b=math.log(b) if b > 0 else -math.inf,
    )


def absorption_solve(
    env: Environment, targets: list[int] | tuple[int, ...]
) -> dict[int, float]:
    """Hitting probabilities by linear solve, independent of the edge formula.

    For each target ``x``, solves the harmonic system for the probability
    that the walk started at the root reaches ``x`` before the anchor above
    the root.  States are the realized vertices; moves into *unrealized*
    children are dropped and the remaining conductances renormalized.  This
    reflecting treatment is exact for root-to-target absorption: excursions
    into a side subtree must return to their entry vertex before touching
    either absorbing state (the tree has no other way out, and the quenched
    walk is recurrent), so erasing them changes nothing.
    """
    n = env.n_nodes
    for x in targets:
        env._check(x)

    # per-node renormalized neighbour probabilities over realized moves
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    up_prob = np.zeros(n)  # probability of the move towards the anchor
    for u in range(n):
        nc = env._n_child[u]
        kids = (
            range(env._first_child[u], env._first_child[u] + nc)
            if nc > 0
            else ()
        )
        vu = float(env._V[u])
        # weights e^{-V(u)} (up) and e^{-V(c)} (down), shifted by the max
        shift = max([vu] + [float(env._V[c]) for c in kids])
        wu = math.exp(-vu + shift)
        wk = [math.exp(-float(env._V[c]) + shift) for c in kids]
        denom = wu + sum(wk)
        up_prob[u] = wu / denom
        for c, w in zip(kids, wk):
            rows.append(u)
            cols.append(c)
            vals.append(w / denom)
    parent_entries = [
        (u, int(env._parent[u]), up_prob[u]) for u in range(n) if env._parent[u] >= 0
    ]
    for u, p, q in parent_entries:
        rows.append(u)
        cols.append(p)
        vals.append(q)
    # the root's up-move leads to the absorbing anchor: contributes 0
    Q = scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n, n)
    )

    out: dict[int, float] = {}
    eye = scipy.sparse.identity(n, format="csr")
    for x in targets:
        if x == 0:
            out[0] = 1.0  # the forced entry step hits the root surely
            continue
        # absorb at x: zero its outgoing row, move its column to the rhs
        mask = np.ones(n, dtype=bool)
        mask[x] = False
        A = (eye - Q)[mask][:, mask]
        rhs = np.asarray(Q[mask][:, x].todense()).ravel()
        try:
            sol = scipy.sparse.linalg.spsolve(A.tocsc(), rhs)
        except Exception as exc:  # singular / disconnected
            raise RuntimeError(f"absorption system is singular: {exc}") from exc
        if np.any(~np.isfinite(sol)):
            raise RuntimeError("absorption system is singular (non-finite solution)")
        p = np.zeros(n)
        p[mask] = sol
        p[x] = 1.0
        out[int(x)] = float(p[0])
    return out


# ---------------------------------------------------------------------------
# single-excursion local time and its n-fold sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleExcursionLaw:
    """Distribution of one edge's local time over a single excursion:
    ``P(L = 0) = 1 - a`` and ``P(L >= k) = a b^{k-1}`` for ``k >= 1``."""

    edge: EdgeLaw

    def tail(self, k: int) -> float:
        """P(L >= k)."""
        if k <= 0:
            return 1.0
        e = self.edge
        if e.b == 0.0:
            return e.a if k == 1 else 0.0
        return math.exp(e.log_a + (k - 1) * e.log_b)

    def log_tail(self, k: int) -> float:
        if k <= 0:
            return 0.0
        e = self.edge
        if e.b == 0.0:
            return e.log_a if k == 1 else -math.inf
        return e.log_a + (k - 1) * e.log_b

    def pmf(self, k: int) -> float:
        """P(L = k)."""
        if k < 0:
            return 0.0
        if k == 0:
            return 1.0 - self.edge.a
        return self.tail(k) - self.tail(k + 1)

    def mean(self) -> float:
        """E[L] = a / (1 - b) = a H = e^{-V}."""
        e = self.edge
        return e.a * e.H


def single_excursion_law(edge: EdgeLaw) -> SingleExcursionLaw:
    return SingleExcursionLaw(edge=edge)


def one_excursion_heavy_logprob(n: int, k: int, edge: EdgeLaw) -> float:
    """log P(local time >= k after n excursions, exactly one visiting).

    Exactly one of the n excursions hits the edge and that one excursion
    accumulates local time >= k:
    ``n a (1-a)^{n-1} b^{k-1}``, assembled in log space.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    e = edge
    if e.a == 1.0 and n > 1:
        return -math.inf  # (1-a)^{n-1} = 0
    if e.b == 0.0 and k > 1:
        return -math.inf
    out = math.log(n) + e.log_a
    if n > 1:
        out += (n - 1) * math.log1p(-e.a)
    if k > 1:
        out += (k - 1) * e.log_b
    return out


def one_excursion_heavy_prob(n: int, k: int, edge: EdgeLaw) -> float:
    """``n a (1-a)^{n-1} b^{k-1}``; 0.0 if it underflows (use the log form)."""
    lp = one_excursion_heavy_logprob(n, k, edge)
    return math.exp(lp) if lp > -745.0 else 0.0


@dataclass
class GeoSumDistribution:
    """Exact distribution of the local time after n excursions.

    ``pmf[j] = P(sum of n zero-inflated geometrics = j)`` for
    ``j = 0..cap``; ``tail_mass`` is the exactly-accounted probability
    beyond the cap (mass lost to truncation during convolution can only
    move upward, so ``1 - pmf.sum()`` is exact).
    """

    n: int
    a: float
    b: float
    pmf: np.ndarray
    tail_mass: float

    def cdf(self, j: int) -> float:
        if j < 0:
            return 0.0
        j = min(j, len(self.pmf) - 1)
        return float(self.pmf[: j + 1].sum())

    def sf(self, j: int) -> float:
        """P(sum >= j), including the truncated tail."""
        if j <= 0:
            return 1.0
        return float(self.pmf[min(j, len(self.pmf)):].sum()) + self.tail_mass

    def mean_cap(self) -> float:
        """Mean restricted to the capped support (diagnostic)."""
        return float(np.arange(len(self.pmf)) @ self.pmf)


def _single_pmf(a: float, b: float, cap: int) -> np.ndarray:
    p = np.zeros(cap + 1)
    p[0] = 1.0 - a
    if cap >= 1:
        if b == 0.0:
            p[1] = a
        else:
            k = np.arange(1, cap + 1)
            p[1:] = a * (1.0 - b) * b ** (k - 1)
    return p


def _cap_heuristic(n: int, a: float, b: float) -> int:
    """Starting cap: roughly mean + spread + geometric-tail headroom."""
    if b >= 1.0 or a <= 0.0:
        raise ValueError("need a in (0,1], b in [0,1)")
    mean = n * a / (1.0 - b)
    var = n * (a * (1.0 + b) / (1.0 - b) ** 2 - (a / (1.0 - b)) ** 2)
    sd = math.sqrt(max(var, 1.0))
    geo = 0.0
    if b > 0.0:
        # union-bound headroom: n a b^{c-1} < 1e-14
        geo = (math.log(n * a) + 14 * math.log(10)) / (-math.log(b))
    return int(mean + 12 * sd + max(geo, 0.0)) + 8


def geo_sum_distribution(
    n: int, a: float, b: float, cap: int | None = None
) -> GeoSumDistribution:
    """Left-fold convolution of n single-excursion local-time laws.

    The cap adapts until the truncated tail mass is below 1e-12 (unless an
    explicit cap pins it, in which case the tail is reported as-is, never
    silently dropped).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < a <= 1.0) or not (0.0 <= b < 1.0):
        raise ValueError("need a in (0,1], b in [0,1)")
    fixed = cap is not None
    c = int(cap) if fixed else _cap_heuristic(n, a, b)
    while True:
        single = _single_pmf(a, b, c)
        pmf = single
        for _ in range(n - 1):
            pmf = np.convolve(pmf, single)[: c + 1]
        tail = max(0.0, 1.0 - float(pmf.sum()))
        if fixed or tail < 1e-12:
            return GeoSumDistribution(n=n, a=a, b=b, pmf=pmf, tail_mass=tail)
        c *= 2


# ---------------------------------------------------------------------------
# tail-bound checks for the geometric-sum law
# ---------------------------------------------------------------------------

@dataclass
class GeoSumBoundReport:
    """Exact-DP evaluation of the three tail bounds at one parameter point.

    - lower tail: P(sum <= A) <= exp(-lam (n a/(1+lam) - (1-b) A)),
      asserted exactly;
    - upper tail at threshold t: P(sum >= t) <= 2 n a e^{-c t(1-b)} holds
      for *some* c > 0 when t(1-b) >= (1+eta) n a; we report the implied
      c = -log(P / (2na)) / (t (1-b));
    - the two-visit variant divides by 2 (na)^2 instead and subtracts the
      exactly-one-nonzero contribution n (1-a)^{n-1} a b^{t-1} in closed
      form.
    """

    n: int
    a: float
    b: float
    A: float
    lam: float
    t: int
    lower_prob: float
    lower_bound: float
    lower_holds: bool
    eta: float | None = None          # actual t(1-b)/(na) - 1, if positive
    upper_prob: float | None = None
    implied_c: float | None = None    # None when skipped
    upper2_prob: float | None = None
    implied_c2: float | None = None
    skipped: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def check_geo_sum_bounds(
    n: int,
    a: float,
    b: float,
    t: int,
    A: float = 0.0,
    lam: float = 0.5,
    eta_min: float = 0.0,
) -> GeoSumBoundReport:
    """Evaluate the geometric-sum tail bounds at one (n, a, b, t, A, lam)."""
    if not (0.0 < lam < 1.0):
        raise ValueError("lam must be in (0, 1)")
    if A < 0:
        raise ValueError("A must be >= 0")
    if t < 1:
        raise ValueError("t must be >= 1")
    dist = geo_sum_distribution(n, a, b)
    lower_prob = dist.cdf(int(math.floor(A)))
    lower_bound = math.exp(-lam * (n * a / (1.0 + lam) - (1.0 - b) * A))
    report = GeoSumBoundReport(
        n=n, a=a, b=b, A=A, lam=lam, t=t,
        lower_prob=lower_prob,
        lower_bound=lower_bound,
        lower_holds=lower_prob <= lower_bound,
    )
    # upper-tail checks require the separation t(1-b) >= (1+eta) n a
    eta = t * (1.0 - b) / (n * a) - 1.0
    if eta <= eta_min:
        report.skipped = (
            f"upper-tail precondition fails: t(1-b)/(na) - 1 = {eta:.3g}"
        )
        return report
    report.eta = eta
    rate = t * (1.0 - b)
    p_up = dist.sf(t)
    report.upper_prob = p_up
    if p_up > 0.0:
        report.implied_c = -math.log(p_up / (2 * n * a)) / rate
    else:
        report.implied_c = math.inf
    # exactly one nonzero summand reaching t, in closed form
    log_one = (
        math.log(n) + (n - 1) * math.log1p(-a) + math.log(a)
        + (t - 1) * (math.log(b) if b > 0 else -math.inf)
    ) if (b > 0 or t == 1) else -math.inf
    p_one = math.exp(log_one) if log_one > -745 else 0.0
    p2 = max(0.0, p_up - p_one)
    report.upper2_prob = p2
    if p2 > 0.0:
        report.implied_c2 = -math.log(p2 / (2 * (n * a) ** 2)) / rate
    else:
        report.implied_c2 = math.inf
    return report


def sweep_geo_sum_bounds(
    points: list[dict],
) -> list[GeoSumBoundReport]:
    """Run the bound checks on a parameter grid (list of kwargs dicts)."""
    return [check_geo_sum_bounds(**p) for p in points]


def default_bound_grid() -> list[dict]:
    """A 27-point (n, a, b) cube with thresholds derived per point.

    ``t`` sits safely above the upper-tail precondition ``t(1-b) >= 1.5 na``
    and ``A`` at half the mean count ``na``, so every point exercises both
    tails; ``lam`` stays at the check's default.
    """
    grid = []
    for n in (2, 8, 32):
        for a in (0.2, 0.5, 0.8):
            for b in (0.2, 0.5, 0.8):
                t = int(math.ceil(2.0 * n * a / (1.0 - b))) + 1
                grid.append({"n": n, "a": a, "b": b, "t": t, "A": 0.5 * n * a})
    return grid
