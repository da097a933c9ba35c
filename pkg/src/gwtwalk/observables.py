"""Path functionals, barrier sets, range statistics and additive martingales.

Everything here is a pure measurement over a realized environment or a walk
record.  Path functionals are kept in log domain (the conductance sum ``H``
can overflow ``float64`` on deep unlucky paths), and the two computation
routes — a recursive cached table over the whole arena and a direct
recomputation along a single ancestral path — are exposed separately so they
can cross-validate each other.

Naming note for the barrier families: each realized vertex ``x`` carries its
potential ``V(x)``, the running maximum ``v_max`` along its ancestry and the
conductance sum ``H_x``.  The sets used by the range analysis are phrased in
terms of the *gap* ``v_max - V`` (how far the potential has come down off its
peak), the *peak* ``v_max`` itself, the *endpoint* ``V``, and the running
maximum of ``H`` along the ancestry (the "conductance line").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernel import njit
from .environment import Environment, GaussianBinaryLaw

__all__ = [
    "PathStats",
    "PathStatsTable",
    "path_stats",
    "path_stats_table",
    "check_path_invariants",
    "BarrierSpec",
    "in_barrier",
    "in_barrier_mask",
    "loglog_offset",
    "heavy_threshold",
    "heavy_range",
    "heavy_range_by_excursions",
    "stopping_line_hit",
    "MartingaleTable",
    "martingales",
    "martingales_streamed",
    "sample_martingale_ensemble",
]


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathStats:
    """Cached functionals of the potential along one ancestral path.

    ``log_H`` is the log of the conductance sum
    ``H_x = sum_{y on [root, x]} e^{V(y) - V(x)}`` (the expected number of
    visits to ``x`` per excursion that hits ``x``, up to the factor ``a_x``).
    ``max_log_H`` runs over the closed path, ``max_log_H_strict`` over strict
    ancestors only (``-inf`` at the root).
    """

    node: int
    depth: int
    V: float
    v_max: float
    v_min: float
    log_H: float
    max_log_H: float
    max_log_H_strict: float

    @property
    def H(self) -> float:
        return math.exp(self.log_H)

    @property
    def gap(self) -> float:
        """``v_max - V``: drop from the ancestral peak to the endpoint."""
        return self.v_max - self.V


@njit(cache=True)
def _fill_stats(parent, V, v_max, v_min, log_H, max_log_H):  # pragma: no cover
    n = len(V)
    for i in range(1, n):
        p = parent[i]
        vi = V[i]
        v_max[i] = max(v_max[p], vi)
        v_min[i] = min(v_min[p], vi)
        log_H[i] = np.logaddexp(0.0, V[p] - vi + log_H[p])
        max_log_H[i] = max(max_log_H[p], log_H[i])


class PathStatsTable:
    """Path functionals for every realized vertex, via the recursion
    ``H_x = 1 + e^{V(parent) - V(x)} H_parent`` (one forward pass; children
    always carry larger arena ids than their parents)."""

    def __init__(self, env: Environment):
        n = env.n_nodes
        self.env = env
        self.n = n
        self.depth = env._depth[:n].copy()
        self.V = env._V[:n].copy()
        self.parent = env._parent[:n].copy()
        self.v_max = self.V.copy()
        self.v_min = self.V.copy()
        self.log_H = np.zeros(n)
        self.max_log_H = np.zeros(n)
        if n > 1:
            _fill_stats(
                self.parent, self.V, self.v_max, self.v_min,
                self.log_H, self.max_log_H,
            )

    def max_log_H_strict(self, node_id: int) -> float:
        p = self.parent[node_id]
        return float(self.max_log_H[p]) if p >= 0 else -math.inf

    def node(self, node_id: int) -> PathStats:
        if not (0 <= node_id < self.n):
            raise IndexError(f"node {node_id} not in table (n={self.n})")
        return PathStats(
            node=int(node_id),
            depth=int(self.depth[node_id]),
            V=float(self.V[node_id]),
            v_max=float(self.v_max[node_id]),
            v_min=float(self.v_min[node_id]),
            log_H=float(self.log_H[node_id]),
            max_log_H=float(self.max_log_H[node_id]),
            max_log_H_strict=self.max_log_H_strict(node_id),
        )


def path_stats_table(env: Environment, validate: bool = False) -> PathStatsTable:
    """Compute cached path functionals for all realized vertices."""
    table = PathStatsTable(env)
    if validate:
        check_path_invariants(table)
    return table


def path_stats(env: Environment, node_id: int) -> PathStats:
    """Direct recomputation for one vertex, independent of the table.

    Climbs to the root and evaluates the conductance sums by accumulated
    log-sum-exp over path prefixes — an O(depth) oracle for the recursion.
    """
    env._check(node_id)
    chain = [node_id]
    while env._parent[chain[-1]] >= 0:
        chain.append(int(env._parent[chain[-1]]))
    chain.reverse()  # root ... node
    Vp = env._V[chain]
    prefix_lse = np.logaddexp.accumulate(Vp)  # log sum of e^{V(y)} over prefixes
    log_H = prefix_lse - Vp
    max_log_H = np.maximum.accumulate(log_H)
    d = len(chain) - 1
    return PathStats(
        node=int(node_id),
        depth=d,
        V=float(Vp[-1]),
        v_max=float(Vp.max()),
        v_min=float(Vp.min()),
        log_H=float(log_H[-1]),
        max_log_H=float(max_log_H[-1]),
        max_log_H_strict=float(max_log_H[-2]) if d >= 1 else -math.inf,
    )


def check_path_invariants(table: PathStatsTable, rtol: float = 1e-9) -> None:
    """Assert the deterministic sandwich bounds on every realized vertex.

    ``e^{v_max - V} <= H_x <= (depth+1) e^{v_max - V}`` (equivalently the
    hitting probability ``a_x = e^{-V}/H_x`` is at most ``e^{-v_max}``).
    """
    gap = table.v_max - table.V
    lo = gap - rtol
    hi = gap + np.log(table.depth + 1.0) + rtol
    bad_lo = np.nonzero(table.log_H < lo)[0]
    bad_hi = np.nonzero(table.log_H > hi)[0]
    if len(bad_lo):
        i = int(bad_lo[0])
        raise AssertionError(
            f"node {i}: log H = {table.log_H[i]} below gap bound {gap[i]}"
        )
    if len(bad_hi):
        i = int(bad_hi[0])
        raise AssertionError(
            f"node {i}: log H = {table.log_H[i]} above (depth+1) gap bound"
        )


# ---------------------------------------------------------------------------
# barrier sets
# ---------------------------------------------------------------------------

_KINDS = (
    "gap-end",        # gap <= theta log n + a  and  V <= (1-theta) log n + b
    "peak-end",       # v_max <= log n + a      and  V <= (1-theta) log n + b
    "peak-above",     # v_max >= log n + sign * (coeff log log n)
    "gap-window",     # |gap - theta log n| <= half-width (constant or loglog)
    "below-line",     # max_{y<x} H_y < r
    "stopping-line",  # max_{y<x} H_y < r <= H_x
)


def loglog_offset(n: int, coeff: float = 4.0) -> float:
    """The slowly growing window half-width ``coeff * log log n``."""
    if n < 3:
        raise ValueError("loglog offset needs n >= 3")
    return coeff * math.log(math.log(n))


@dataclass(frozen=True)
class BarrierSpec:
    """One barrier-set membership test at horizon ``n``.

    Parameters are interpreted per ``kind``:

    - ``"gap-end"``: offsets ``a``, ``b`` and exponent split ``theta``;
    - ``"peak-end"``: the same, but the first condition caps the peak by
      ``log n + a`` instead of the gap;
    - ``"peak-above"``: ``sign`` (+1/-1) and ``coeff`` for the
      ``log n +/- coeff log log n`` threshold;
    - ``"gap-window"``: half-width = ``K`` if given, else
      ``coeff * log log n``;
    - ``"below-line"`` / ``"stopping-line"``: conductance threshold ``r > 1``.
    """

    kind: str
    n: int
    theta: float = 0.5
    a: float = 0.0
    b: float = 0.0
    sign: int = -1
    coeff: float = 4.0
    K: float | None = None
    r: float = math.inf

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown barrier kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind in ("gap-end", "peak-end", "gap-window"):
            if not (0.0 < self.theta < 1.0):
                raise ValueError("theta must be in (0, 1)")
        if self.kind in ("below-line", "stopping-line"):
            if not (self.r > 1.0):
                raise ValueError("line kinds need r > 1")
        if self.kind == "peak-above" and self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    def window_half_width(self) -> float:
        if self.K is not None:
            return float(self.K)
        return loglog_offset(self.n, self.coeff)


def in_barrier(stats: PathStats, spec: BarrierSpec) -> bool:
    """Exact membership of one vertex in the given barrier set."""
    log_n = math.log(spec.n)
    if spec.kind == "gap-end":
        return (
            stats.gap <= spec.theta * log_n + spec.a
            and stats.V <= (1.0 - spec.theta) * log_n + spec.b
        )
    if spec.kind == "peak-end":
        return (
            stats.v_max <= log_n + spec.a
            and stats.V <= (1.0 - spec.theta) * log_n + spec.b
        )
    if spec.kind == "peak-above":
        return stats.v_max >= log_n + spec.sign * loglog_offset(spec.n, spec.coeff)
    if spec.kind == "gap-window":
        w = spec.window_half_width()
        return abs(stats.gap - spec.theta * log_n) <= w
    log_r = math.log(spec.r) if spec.r < math.inf else math.inf
    if spec.kind == "below-line":
        return stats.max_log_H_strict < log_r
    # stopping-line
    return stats.max_log_H_strict < log_r <= stats.log_H


def in_barrier_mask(table: PathStatsTable, spec: BarrierSpec) -> np.ndarray:
    """Vectorized membership over the whole table (same rule as in_barrier)."""
    log_n = math.log(spec.n)
    gap = table.v_max - table.V
    if spec.kind == "gap-end":
        return (gap <= spec.theta * log_n + spec.a) & (
            table.V <= (1.0 - spec.theta) * log_n + spec.b
        )
    if spec.kind == "peak-end":
        return (table.v_max <= log_n + spec.a) & (
            table.V <= (1.0 - spec.theta) * log_n + spec.b
        )
    if spec.kind == "peak-above":
        return table.v_max >= log_n + spec.sign * loglog_offset(spec.n, spec.coeff)
    if spec.kind == "gap-window":
        w = spec.window_half_width()
        return np.abs(gap - spec.theta * log_n) <= w
    # strict ancestral max of log H: -inf at the root
    strict = np.full(table.n, -np.inf)
    has_parent = table.parent >= 0
    strict[has_parent] = table.max_log_H[table.parent[has_parent]]
    log_r = math.log(spec.r) if spec.r < math.inf else math.inf
    if spec.kind == "below-line":
        return strict < log_r
    return (strict < log_r) & (log_r <= table.log_H)


# ---------------------------------------------------------------------------
# range statistics
# ---------------------------------------------------------------------------

def heavy_threshold(n: int, theta: float) -> int:
    """The local-time threshold ``ceil(n^theta)`` (never below 1)."""
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must be in (0, 1)")
    return max(1, math.ceil(n ** theta))


def heavy_range(record, k: int) -> int:
    """Number of vertices whose edge local time at the record's current
    excursion count is at least ``k``.  The root edge is included (its local
    time equals the number of excursions)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = record.env.n_nodes
    return int(np.count_nonzero(record._lbar[:n] >= k))


def heavy_range_by_excursions(record, k: int) -> dict[int, int]:
    """Partition of ``heavy_range`` by the number of visiting excursions.

    Returns ``{j: #vertices with local time >= k visited by exactly j
    excursions}``; values sum to ``heavy_range(record, k)`` exactly.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = record.env.n_nodes
    sel = record._lbar[:n] >= k
    js, counts = np.unique(record._ecnt[:n][sel], return_counts=True)
    return {int(j): int(c) for j, c in zip(js, counts)}


def stopping_line_hit(record, r: float) -> bool:
    """Whether any visited vertex is a first crossing of conductance ``r``
    (ancestors all below ``r``, the vertex itself at or above)."""
    if r == math.inf:
        return False
    if r <= 1.0:
        raise ValueError("r must be > 1")
    env = record.env
    n = env.n_nodes
    table = path_stats_table(env)
    mask = in_barrier_mask(table, BarrierSpec(kind="stopping-line", n=1, r=r))
    visited = record._lbar[:n] > 0
    return bool(np.any(mask & visited))


# ---------------------------------------------------------------------------
# additive and derivative martingales
# ---------------------------------------------------------------------------

@dataclass
class MartingaleTable:
    """Per-generation martingale values ``W_m = sum e^{-V}`` and
    ``D_m = sum V e^{-V}`` for ``m = 0 .. complete_to``."""

    W: np.ndarray
    D: np.ndarray
    complete_to: int
    requested: int
    truncated: bool = False


def _level_sums(V: np.ndarray) -> tuple[float, float]:
    """(sum e^{-V}, sum V e^{-V}) over one generation, shift-stabilized."""
    if len(V) == 0:
        return 0.0, 0.0
    c = float(V.min())
    w = np.exp(c - V)  # = e^{-V} * e^{c}
    return float(np.exp(-c) * w.sum()), float(np.exp(-c) * (V * w).sum())


def martingales(env: Environment, depth: int) -> MartingaleTable:
    """Realize the environment to ``depth`` and read off (W_m, D_m).

    If the population cap truncates the realization, the table stops at the
    last complete generation and is flagged; no partial generation is ever
    mixed in.
    """
    gen = env.realize_to_depth(depth)
    complete_to = len(gen.sizes) - 1
    if gen.truncated and complete_to > 0:
        complete_to -= 1  # drop the partially realized generation
    n = env.n_nodes
    d = env._depth[:n]
    V = env._V[:n]
    W = np.zeros(complete_to + 1)
    D = np.zeros(complete_to + 1)
    for m in range(complete_to + 1):
        W[m], D[m] = _level_sums(V[d == m])
    return MartingaleTable(
        W=W, D=D, complete_to=complete_to, requested=depth,
        truncated=gen.truncated,
    )


# Width at which a streamed generation is split into sub-broods processed
# depth-first; keeps peak memory ~ depth * chunk independent of 2^depth.
_STREAM_CHUNK = 1 << 18


def martingales_streamed(
    env: Environment, depth: int, rng=None
) -> MartingaleTable:
    """(W_m, D_m) up to ``depth`` without storing the realized tree.

    The realized part of the environment is reused verbatim; every
    unrealized subtree is completed *virtually*, level by level, from a
    dedicated stream — distributionally identical to full realization but
    with memory bounded by the chunk schedule instead of 2^depth.  The
    environment itself is left untouched.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if rng is None:
        rng = env.spawn_rng()
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    law = env.law
    gaussian = isinstance(law, GaussianBinaryLaw)
    if gaussian:
        mu, sd = law.mean, math.sqrt(law.variance)

    W = np.zeros(depth + 1)
    D = np.zeros(depth + 1)
    W[0], D[0] = 1.0, 0.0

    def expand_virtual(V: np.ndarray) -> np.ndarray:
        if gaussian:
            out = np.repeat(V, 2)
            out += rng.normal(mu, sd, size=out.size)
            return out
        parts = [v + law.sample(rng) for v in V]
        if not parts:
            return np.empty(0)
        return np.concatenate(parts)

    # Phase 1: walk the realized arena level by level, shedding virtual
    # frontiers (realized vertices whose children were never grown).
    real = np.array([0], dtype=np.int64)
    virtual_stack: list[tuple[np.ndarray, int]] = []
    for m in range(1, depth + 1):
        shed = real[env._n_child[real] < 0]
        if len(shed):
            virtual_stack.append((env._V[shed].copy(), m - 1))
        keep = real[env._n_child[real] >= 0]
        if len(keep):
            counts = env._n_child[keep]
            firsts = env._first_child[keep]
            kids = np.concatenate(
                [np.arange(f, f + c) for f, c in zip(firsts, counts) if c > 0]
            ) if np.any(counts > 0) else np.empty(0, dtype=np.int64)
            kids = kids.astype(np.int64)
        else:
            kids = np.empty(0, dtype=np.int64)
        if len(kids):
            w, dsum = _level_sums(env._V[kids])
            W[m] += w
            D[m] += dsum
        real = kids
        if len(real) == 0:
            break
    if len(real):  # realized all the way to `depth`; leftover frontier is real
        shed = real[env._n_child[real] < 0]
        # nothing to shed at the final level: those subtrees start below depth
        del shed

    # Phase 2: drain virtual frontiers depth-first in bounded chunks.
    while virtual_stack:
        V, m = virtual_stack.pop()
        if m >= depth:
            continue
        if len(V) > _STREAM_CHUNK:
            half = len(V) // 2
            virtual_stack.append((V[:half], m))
            virtual_stack.append((V[half:], m))
            continue
        kids = expand_virtual(V)
        w, dsum = _level_sums(kids)
        W[m + 1] += w
        D[m + 1] += dsum
        if len(kids):
            virtual_stack.append((kids, m + 1))

    return MartingaleTable(
        W=W, D=D, complete_to=depth, requested=depth, truncated=False
    )


def sample_martingale_ensemble(
    law, depth: int, replicas: int, rng
) -> tuple[np.ndarray, np.ndarray]:
    """(W, D) arrays of shape (replicas, depth+1) over fresh trees.

    Fast path for two-child Gaussian laws: whole replica blocks advance as a
    single matrix per generation.  Falls back to per-replica streaming for
    other laws.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    W = np.ones((replicas, depth + 1))
    D = np.zeros((replicas, depth + 1))
    if not isinstance(law, GaussianBinaryLaw):
        for i in range(replicas):
            env = Environment(law, seed=rng.spawn(1)[0])
            t = martingales_streamed(env, depth, rng=rng.spawn(1)[0])
            W[i], D[i] = t.W, t.D
        return W, D

    mu, sd = law.mean, math.sqrt(law.variance)
    # keep each block's widest generation below ~2^24 entries
    block = max(1, (1 << 24) >> depth)
    for start in range(0, replicas, block):
        stop = min(start + block, replicas)
        r = stop - start
        V = np.zeros((r, 1))
        for m in range(1, depth + 1):
            V = np.repeat(V, 2, axis=1)
            V += rng.normal(mu, sd, size=V.shape)
            c = V.min(axis=1, keepdims=True)
            w = np.exp(c - V)
            scale = np.exp(-c[:, 0])
            W[start:stop, m] = scale * w.sum(axis=1)
            D[start:stop, m] = scale * (V * w).sum(axis=1)
    return W, D
