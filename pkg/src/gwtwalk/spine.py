"""Size-biased trees with a marked ray, and many-to-one cross-checks.

Under the size-biased measure the marked ("spine") particle reproduces with
the tilted brood law — density ``sum_z e^{-z}`` against the original brood
law — and the next spine particle is chosen among its children with
probability proportional to ``e^{-V}``; everyone off the spine branches as
usual.  The spine potential then evolves as a centred random walk whose
increments are the exponentially tilted displacement law, which is what all
many-to-one computations reduce to.

Tilted sampling is exact for the two supported structured laws:

- two-child Gaussian broods decompose as an explicit mixture (pick the
  tilted coordinate uniformly, draw it from the mean-shifted Gaussian, the
  sibling from the original law);
- finite discrete broods enumerate all (row, child) pairs with weights
  ``p_row e^{-displacement}``.

Anything else falls back to rejection against a user-supplied envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .environment import (
    DiscreteLaw,
    Environment,
    GaussianBinaryLaw,
    OffspringLaw,
)
from .estimates import ConstantEstimate

__all__ = [
    "TiltedLaw",
    "tilted_law",
    "SpineTree",
    "sample_spine_tree",
    "sample_spine_path",
    "spine_marginal_check",
    "many_to_one_check",
    "MarginalCheckReport",
    "ManyToOneReport",
]


# ---------------------------------------------------------------------------
# tilted brood sampling
# ---------------------------------------------------------------------------

class TiltedLaw:
    """Sampler for the size-biased brood plus the spine-child pick."""

    def __init__(self, law: OffspringLaw, envelope: float | None = None,
                 rejection_budget: int = 10_000):
        self.law = law
        self.envelope = envelope
        self.rejection_budget = rejection_budget
        self._mode: str
        if isinstance(law, GaussianBinaryLaw):
            self._mode = "gaussian-binary"
        elif isinstance(law, DiscreteLaw):
            self._mode = "discrete"
            self._build_discrete_table(law)
        else:
            self._mode = "rejection"
            if envelope is None:
                raise ValueError(
                    "generic laws need an explicit envelope bound for "
                    "rejection sampling of the tilted brood"
                )

    def _build_discrete_table(self, law: DiscreteLaw) -> None:
        pairs: list[tuple[int, int]] = []
        weights: list[float] = []
        for r, (p, disps) in enumerate(law.rows):
            for i, d in enumerate(disps):
                pairs.append((r, i))
                weights.append(p * math.exp(-d))
        total = sum(weights)
        if total <= 0:
            raise ValueError("law has no children to tilt towards")
        self._pairs = pairs
        self._cum = np.cumsum(np.asarray(weights) / total)

    def sample_brood(self, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        """One tilted brood: (displacements, index of the spine child)."""
        if self._mode == "gaussian-binary":
            law = self.law
            mu, s2 = law.mean, law.variance
            sd = math.sqrt(s2)
            disps = rng.normal(mu, sd, size=2)
            j = int(rng.random() < 0.5)
            disps[j] = rng.normal(mu - s2, sd)  # exponentially tilted marginal
            return disps, j
        if self._mode == "discrete":
            u = rng.random()
            idx = int(np.searchsorted(self._cum, u, side="right"))
            idx = min(idx, len(self._pairs) - 1)
            r, i = self._pairs[idx]
            return np.asarray(self.law.rows[r][1], dtype=float), i
        # rejection: accept a plain brood with probability (sum e^{-z}) / M
        M = float(self.envelope)
        for _ in range(self.rejection_budget):
            disps = self.law.sample(rng)
            w = np.exp(-disps)
            total = float(w.sum())
            if total > M:
                raise RuntimeError(
                    f"rejection envelope violated: sum e^(-z) = {total} > {M}"
                )
            if rng.random() * M < total:
                j = int(rng.choice(len(disps), p=w / total))
                return disps, j
        raise RuntimeError(
            f"tilted rejection budget ({self.rejection_budget}) exhausted"
        )

    def tilted_increment(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """i.i.d. copies of the spine displacement (the tilted step law)."""
        if self._mode == "gaussian-binary":
            law = self.law
            return rng.normal(law.mean - law.variance, math.sqrt(law.variance),
                              size=size)
        out = np.empty(size)
        for i in range(size):
            disps, j = self.sample_brood(rng)
            out[i] = disps[j]
        return out

    def increment_atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(values, probabilities) of the tilted step when it is discrete."""
        if self._mode != "discrete":
            return None
        vals: dict[float, float] = {}
        prev = 0.0
        for (r, i), c in zip(self._pairs, self._cum):
            d = float(self.law.rows[r][1][i])
            vals[d] = vals.get(d, 0.0) + (c - prev)
            prev = c
        keys = np.array(sorted(vals))
        return keys, np.array([vals[k] for k in keys])


def tilted_law(law: OffspringLaw, **kw) -> TiltedLaw:
    return TiltedLaw(law, **kw)


# ---------------------------------------------------------------------------
# spine trees
# ---------------------------------------------------------------------------

@dataclass
class SpineTree:
    """A depth-m tree grown under the size-biased measure.

    Flat arrays as in the plain environment; ``spine[j]`` is the node id of
    the marked particle at depth ``j`` (``spine[0] = 0``).
    """

    parent: np.ndarray
    depth: np.ndarray
    V: np.ndarray
    spine: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.V)

    def children(self, node_id: int) -> np.ndarray:
        return np.nonzero(self.parent == node_id)[0]

    def spine_potentials(self) -> np.ndarray:
        return self.V[self.spine]

    def siblings_of_spine(self, j: int) -> np.ndarray:
        """Non-spine children of the spine particle at depth j-1."""
        if j < 1:
            raise ValueError("j must be >= 1")
        kids = self.children(int(self.spine[j - 1]))
        return kids[kids != self.spine[j]]


def sample_spine_tree(
    law: OffspringLaw, m: int, rng, population_cap: int = 10 ** 7, **tilt_kw
) -> SpineTree:
    """Grow a size-biased tree with its marked ray to depth ``m``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    tl = tilted_law(law, **tilt_kw)
    parent = [-1]
    depth = [0]
    V = [0.0]
    spine = [0]
    frontier: list[int] = [0]  # all nodes of the current generation
    for j in range(1, m + 1):
        nxt: list[int] = []
        w_prev = spine[j - 1]
        for u in frontier:
            if u == w_prev:
                disps, pick = tl.sample_brood(rng)
            else:
                disps, pick = law.sample(rng), -1
            for i, d in enumerate(disps):
                parent.append(u)
                depth.append(j)
                V.append(V[u] + float(d))
                nxt.append(len(V) - 1)
                if i == pick:
                    spine.append(len(V) - 1)
            if len(V) > population_cap:
                raise RuntimeError("spine tree exceeded the population cap")
        if len(spine) != j + 1:
            raise RuntimeError("tilted brood produced no spine child")
        frontier = nxt
    return SpineTree(
        parent=np.asarray(parent, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
        V=np.asarray(V),
        spine=np.asarray(spine, dtype=np.int64),
    )


def sample_spine_path(law: OffspringLaw, m: int, rng, **tilt_kw) -> np.ndarray:
    """Only the marked ray's potentials (V(w_0), ..., V(w_m)).

    Runs the per-generation brood construction for the spine particle alone,
    so it still exercises the tilted sampler and the e^{-V} child pick.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    tl = tilted_law(law, **tilt_kw)
    out = np.zeros(m + 1)
    for j in range(1, m + 1):
        disps, pick = tl.sample_brood(rng)
        out[j] = out[j - 1] + float(disps[pick])
    return out


# ---------------------------------------------------------------------------
# distributional checks
# ---------------------------------------------------------------------------

@dataclass
class MarginalCheckReport:
    m: int
    samples: int
    statistic: float
    p_value: float
    test: str  # "ks-2samp" or "chi2"

    @property
    def passed(self) -> bool:
        return self.p_value > 0.01


def spine_marginal_check(
    law: OffspringLaw, m: int, samples: int, rng, **tilt_kw
) -> MarginalCheckReport:
    """Compare V(w_m) from the construction against m i.i.d. tilted steps.

    Continuous laws get a two-sample KS test; finite discrete laws get an
    exact chi-squared over the (enumerable) atom set.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    tl = tilted_law(law, **tilt_kw)
    lhs = np.array(
        [sample_spine_path(law, m, rng, **tilt_kw)[-1] for _ in range(samples)]
    )
    atoms = tl.increment_atoms()
    if atoms is None:
        rhs = tl.tilted_increment(rng, size=(samples * m)).reshape(samples, m)
        rhs = rhs.sum(axis=1)
        stat, p = scipy.stats.ks_2samp(lhs, rhs)
        return MarginalCheckReport(
            m=m, samples=samples, statistic=float(stat), p_value=float(p),
            test="ks-2samp",
        )
    # exact m-fold convolution of the atom law
    vals, probs = atoms
    law_vals = {0.0: 1.0}
    for _ in range(m):
        nxt: dict[float, float] = {}
        for v0, p0 in law_vals.items():
            for v, p in zip(vals, probs):
                key = round(v0 + v, 12)
                nxt[key] = nxt.get(key, 0.0) + p0 * p
        law_vals = nxt
    support = np.array(sorted(law_vals))
    expected = np.array([law_vals[v] for v in support]) * samples
    observed = np.zeros_like(expected)
    idx = np.searchsorted(support, np.round(lhs, 12))
    idx = np.clip(idx, 0, len(support) - 1)
    for i in idx:
        observed[i] += 1
    keep = expected >= 5.0  # fold sparse cells together
    if (~keep).any():
        observed = np.append(observed[keep], observed[~keep].sum())
        expected = np.append(expected[keep], expected[~keep].sum())
    stat, p = scipy.stats.chisquare(observed, expected)
    return MarginalCheckReport(
        m=m, samples=samples, statistic=float(stat), p_value=float(p),
        test="chi2",
    )


@dataclass
class ManyToOneReport:
    lhs: ConstantEstimate
    rhs: ConstantEstimate
    compatible: bool

    def gap_z(self) -> float:
        se = math.hypot(self.lhs.se, self.rhs.se)
        return abs(self.lhs.value - self.rhs.value) / se if se > 0 else math.inf


def _direct_leaf_paths(law: OffspringLaw, m: int, rng) -> np.ndarray:
    """Potential paths of every depth-m vertex of one fresh tree.

    Returns an array of shape (leaves, m) whose row i is
    (V(u_1), ..., V(u_m)) along the ancestry of leaf i.
    """
    if isinstance(law, GaussianBinaryLaw):
        mu, sd = law.mean, math.sqrt(law.variance)
        paths = np.zeros((1, 0))
        V = np.zeros(1)
        for j in range(m):
            V = np.repeat(V, 2) + rng.normal(mu, sd, size=2 * len(V))
            paths = np.repeat(paths, 2, axis=0)
            paths = np.hstack([paths, V[:, None]])
        return paths
    # generic: explicit frontier of (V, path) tuples
    frontier: list[tuple[float, tuple[float, ...]]] = [(0.0, ())]
    for j in range(m):
        nxt = []
        for v, path in frontier:
            for d in law.sample(rng):
                nv = v + float(d)
                nxt.append((nv, path + (nv,)))
        frontier = nxt
    if not frontier:
        return np.zeros((0, m))
    return np.array([p for _, p in frontier])


def many_to_one_check(
    law: OffspringLaw,
    m: int,
    f,
    samples: int,
    rng,
    z: float = 3.0,
    **tilt_kw,
) -> ManyToOneReport:
    """Two Monte Carlo routes to E[sum_{|u|=m} e^{-V(u)} f(path)].

    The left side simulates plain trees and accumulates leaf weights; the
    right side averages ``f`` over paths of i.i.d. tilted increments.  ``f``
    maps an (N, m) path array to N values and must be bounded for the SEs
    to mean anything.
    """
    if m < 1 or m > 16:
        raise ValueError("m must be in 1..16 (direct tree side is 2^m)")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    tl = tilted_law(law, **tilt_kw)
    vals = np.empty(samples)
    for i in range(samples):
        paths = _direct_leaf_paths(law, m, rng)
        if len(paths) == 0:
            vals[i] = 0.0
            continue
        w = np.exp(-paths[:, -1])
        vals[i] = float(w @ np.asarray(f(paths), dtype=float))
    lhs = ConstantEstimate(
        value=float(vals.mean()),
        se=float(vals.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        method="direct-tree",
        params={"m": m},
    )
    steps = tl.tilted_increment(rng, size=samples * m).reshape(samples, m)
    spaths = np.cumsum(steps, axis=1)
    fv = np.asarray(f(spaths), dtype=float)
    rhs = ConstantEstimate(
        value=float(fv.mean()),
        se=float(fv.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        method="tilted-walk",
        params={"m": m},
    )
    return ManyToOneReport(
        lhs=lhs, rhs=rhs, compatible=lhs.consistent_with(rhs, z=z)
    )
