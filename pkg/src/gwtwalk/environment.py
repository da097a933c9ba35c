"""Boundary-case branching-random-walk environments on lazily grown trees.

The environment of the biased walk is a rooted weighted tree: every node x
carries a potential V(x), the root has V = 0, and the displacements
(V(child) - V(parent)) of a brood are one draw from an offspring point
process.  The laws of interest satisfy the boundary-case normalisation

    E[sum_{|x|=1} e^{-V(x)}] = 1,      E[sum_{|x|=1} V(x) e^{-V(x)}] = 0,

which makes the walk on the tree null recurrent and slow.  Trees are grown
on demand (the walk only ever needs children of visited nodes), stored in a
flat arena so the stepping kernel can run over plain arrays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LN2 = math.log(2.0)

#: parent marker for the root: the virtual vertex one level above the root.
ROOT_PARENT = -1

#: law kinds understood natively by the stepping kernel.
KERNEL_LAW_GENERIC = 0
KERNEL_LAW_GAUSSIAN_BINARY = 1
KERNEL_LAW_DISCRETE = 2


class PopulationCapError(RuntimeError):
    """Raised when realizing more nodes would exceed the arena population cap."""


@dataclass(frozen=True)
class LawMoments:
    """Analytic moments of an offspring law, when known in closed form.

    mean_additive   = E[sum e^{-xi}]        (must be 1 in the boundary case)
    mean_derivative = E[sum xi e^{-xi}]     (must be 0 in the boundary case)
    sigma2          = E[sum xi^2 e^{-xi}]   (variance of the tilted step)
    mean_offspring  = E[N]
    """

    mean_additive: float
    mean_derivative: float
    sigma2: float
    mean_offspring: float


class OffspringLaw:
    """Base class for offspring point-process laws.

    Subclasses provide ``sample(rng)`` returning one brood's displacement
    array, plus optional analytic moments and a kernel spec so the walk
    kernel can realize children without leaving compiled code.
    """

    kind: str = "generic"
    moments: LawMoments | None = None

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def kernel_spec(self):
        """(kind code, float params, int params) consumed by the walk kernel."""
        return (KERNEL_LAW_GENERIC, np.empty(0), np.empty(0, dtype=np.int64))

    def max_brood(self) -> int:
        """Largest brood size the law can produce (0 if unknown)."""
        return 0

    def to_config(self) -> dict:
        raise NotImplementedError(f"law kind {self.kind!r} has no config form")


@dataclass(frozen=True)
class GaussianBinaryLaw(OffspringLaw):
    """Exactly two children, i.i.d. Gaussian displacements N(mean, variance)."""

    mean: float
    variance: float
    kind: str = field(default="gaussian-binary", init=False)

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        mu, s2 = self.mean, self.variance
        # Closed-form Gaussian integrals: E[e^{-xi}] = e^{-mu + s2/2},
        # E[xi e^{-xi}] = (mu - s2) e^{-mu + s2/2},
        # E[xi^2 e^{-xi}] = ((mu - s2)^2 + s2) e^{-mu + s2/2}, two children each.
        w = math.exp(-mu + s2 / 2.0)
        object.__setattr__(
            self,
            "moments",
            LawMoments(
                mean_additive=2.0 * w,
                mean_derivative=2.0 * (mu - s2) * w,
                sigma2=2.0 * ((mu - s2) ** 2 + s2) * w,
                mean_offspring=2.0,
            ),
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.variance), size=2)

    def max_brood(self) -> int:
        return 2

    def kernel_spec(self):
        return (
            KERNEL_LAW_GAUSSIAN_BINARY,
            np.array([self.mean, math.sqrt(self.variance)]),
            np.empty(0, dtype=np.int64),
        )

    def to_config(self) -> dict:
        return {"kind": "gaussian-binary", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class DiscreteLaw(OffspringLaw):
    """Finite table of broods: rows of (probability, displacement tuple).

    The child count of a row is the length of its displacement tuple; rows
    with an empty tuple encode childless broods.
    """

    rows: tuple[tuple[float, tuple[float, ...]], ...]
    kind: str = field(default="discrete", init=False)

    def __post_init__(self):
        probs = np.array([p for p, _ in self.rows])
        if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("row probabilities must be nonnegative and sum to 1")
        add = der = s2 = nbar = 0.0
        for p, disps in self.rows:
            d = np.asarray(disps, dtype=float)
            w = np.exp(-d)
            add += p * w.sum()
            der += p * (d * w).sum()
            s2 += p * (d * d * w).sum()
            nbar += p * len(d)
        object.__setattr__(
            self, "moments", LawMoments(add, der, s2, nbar)
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        u = rng.random()
        acc = 0.0
        for p, disps in self.rows:
            acc += p
            if u < acc:
                return np.asarray(disps, dtype=float)
        return np.asarray(self.rows[-1][1], dtype=float)

    def max_brood(self) -> int:
        return max(len(d) for _, d in self.rows)

    def kernel_spec(self):
        # Flattened table: cumulative row probabilities, per-row offsets into
        # a single displacement vector.  Row choice consumes one uniform, in
        # the same order as sample(), so kernel and Python realization agree.
        cum = np.cumsum([p for p, _ in self.rows])
        offsets = np.zeros(len(self.rows) + 1, dtype=np.int64)
        disps: list[float] = []
        for i, (_, ds) in enumerate(self.rows):
            disps.extend(ds)
            offsets[i + 1] = len(disps)
        return (
            KERNEL_LAW_DISCRETE,
            np.concatenate([cum, np.asarray(disps, dtype=float)]),
            np.concatenate([np.array([len(self.rows)], dtype=np.int64), offsets]),
        )

    def to_config(self) -> dict:
        return {
            "kind": "discrete",
            "rows": [[p, list(d)] for p, d in self.rows],
        }


@dataclass(frozen=True)
class CustomLaw(OffspringLaw):
    """Arbitrary user-supplied brood sampler, with moments if known."""

    sampler: Callable[[np.random.Generator], np.ndarray]
    name: str = "custom"
    analytic: LawMoments | None = None
    kind: str = field(default="custom", init=False)

    def __post_init__(self):
        object.__setattr__(self, "moments", self.analytic)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.sampler(rng), dtype=float)


def make_canonical_law() -> GaussianBinaryLaw:
    """The package's reference boundary-case law.

    Two children with i.i.d. N(2 ln 2, 2 ln 2) displacements.  Then
    E[e^{-xi}] = e^{-mu + s^2/2} = 1/2 per child, so the additive mean is 1;
    the exponentially tilted displacement is N(mu - s^2, s^2) = N(0, 2 ln 2),
    so the derivative mean is 0 and sigma^2 = 2 ln 2.
    """
    return GaussianBinaryLaw(mean=2 * LN2, variance=2 * LN2)


def law_from_config(cfg: dict) -> OffspringLaw:
    """Build a law from a structured config: {"kind": ..., parameters...}."""
    kind = cfg.get("kind")
    if kind == "canonical":
        return make_canonical_law()
    if kind == "gaussian-binary":
        return GaussianBinaryLaw(mean=float(cfg["mean"]), variance=float(cfg["variance"]))
    if kind == "discrete":
        rows = tuple(
            (float(p), tuple(float(x) for x in disps)) for p, disps in cfg["rows"]
        )
        return DiscreteLaw(rows=rows)
    raise ValueError(f"unknown law kind {kind!r}")


# ---------------------------------------------------------------------------
# boundary-case verification
# ---------------------------------------------------------------------------

@dataclass
class BoundaryCaseReport:
    """Outcome of checking a law against the boundary-case assumptions."""

    additive_mean: float
    additive_se: float
    derivative_mean: float
    derivative_se: float
    sigma2: float
    sigma2_se: float
    mean_offspring: float
    moment_cond: float
    exp_moment_neg: float  # E[sum e^{-(1+delta0) xi}] probe at delta0 = 0.5
    exp_moment_pos: float  # E[sum e^{delta0 xi}] probe
    analytic: bool
    passed: bool
    reasons: list[str]

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"boundary-case check: {status}"
            + (" (analytic)" if self.analytic else " (Monte Carlo)"),
            f"  E[sum e^-V]      = {self.additive_mean:.6f} +- {self.additive_se:.2g}"
            "   (target 1)",
            f"  E[sum V e^-V]    = {self.derivative_mean:+.6f} +- {self.derivative_se:.2g}"
            "   (target 0)",
            f"  sigma^2          = {self.sigma2:.6f} +- {self.sigma2_se:.2g}",
            f"  E[N]             = {self.mean_offspring:.4f}",
            f"  moment condition = {self.moment_cond:.4g}",
            f"  exp-moment probes: {self.exp_moment_neg:.4g}, {self.exp_moment_pos:.4g}",
        ]
        lines += [f"  reason: {r}" for r in self.reasons]
        return "\n".join(lines)


def verify_boundary_case(
    law: OffspringLaw,
    sample_count: int = 100_000,
    tolerance: float = 4.0,
    rng: np.random.Generator | None = None,
    delta0: float = 0.5,
) -> BoundaryCaseReport:
    """Check the boundary-case normalisation and moment assumptions.

    Uses analytic moments when the law carries them, otherwise Monte Carlo
    over ``sample_count`` broods; ``tolerance`` is the number of standard
    errors allowed around the targets.  Supercriticality (E[N] > 1), a
    positive finite sigma^2, and finite probes of the exponential-moment and
    second-moment conditions are required for a pass.
    """
    if sample_count < 10**3:
        raise ValueError("sample_count must be at least 1000")
    rng = np.random.default_rng(rng)

    # Monte Carlo probes are always run: the exponential-moment and offspring
    # second-moment conditions have no analytic shortcut for a generic law.
    adds = np.empty(sample_count)
    ders = np.empty(sample_count)
    sq = np.empty(sample_count)
    ns = np.empty(sample_count)
    mom = np.empty(sample_count)
    eneg = np.empty(sample_count)
    epos = np.empty(sample_count)
    for i in range(sample_count):
        d = law.sample(rng)
        w = np.exp(-d)
        adds[i] = w.sum()
        ders[i] = (d * w).sum()
        sq[i] = (d * d * w).sum()
        n = len(d)
        ns[i] = n
        mom[i] = n * n + ((1.0 + np.maximum(d, 0.0)) ** 2 * w).sum() ** 2
        eneg[i] = np.exp(-(1.0 + delta0) * d).sum()
        epos[i] = np.exp(delta0 * d).sum()

    def mc(v):
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))

    analytic = law.moments is not None
    if analytic:
        m = law.moments
        add, add_se = m.mean_additive, 0.0
        der, der_se = m.mean_derivative, 0.0
        s2, s2_se = m.sigma2, 0.0
        nbar = m.mean_offspring
    else:
        add, add_se = mc(adds)
        der, der_se = mc(ders)
        s2, s2_se = mc(sq)
        nbar = float(ns.mean())

    moment_cond = float(mom.mean())
    em_neg = float(eneg.mean())
    em_pos = float(epos.mean())

    reasons: list[str] = []
    if nbar <= 1.0:
        reasons.append(f"E[N]={nbar:.4f} not supercritical")
    atol = tolerance * add_se if add_se > 0 else 1e-9
    if abs(add - 1.0) > atol:
        reasons.append(f"additive mean {add:.6f} differs from 1 beyond tolerance")
    dtol = tolerance * der_se if der_se > 0 else 1e-9
    if abs(der) > dtol:
        reasons.append(f"derivative mean {der:+.6f} differs from 0 beyond tolerance")
    if not (s2 > 0.0 and math.isfinite(s2)):
        reasons.append(f"sigma^2={s2} outside (0, inf)")
    if not math.isfinite(moment_cond):
        reasons.append("offspring second-moment condition estimate not finite")
    if not (math.isfinite(em_neg) and math.isfinite(em_pos)):
        reasons.append("exponential-moment probe not finite")

    return BoundaryCaseReport(
        additive_mean=add,
        additive_se=add_se,
        derivative_mean=der,
        derivative_se=der_se,
        sigma2=s2,
        sigma2_se=s2_se,
        mean_offspring=nbar,
        moment_cond=moment_cond,
        exp_moment_neg=em_neg,
        exp_moment_pos=em_pos,
        analytic=analytic,
        passed=not reasons,
        reasons=reasons,
    )


# ---------------------------------------------------------------------------
# the tree arena
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    """Read-only view of one tree node."""

    id: int
    parent: int
    depth: int
    V: float
    children: tuple[int, ...] | None  # None until realized
    realized: bool


@dataclass
class GenerationSizes:
    """Per-generation population from a breadth-first realization."""

    sizes: list[int]
    truncated: bool = False


class Environment:
    """Lazily realized tree environment backed by flat arrays.

    Node ids are dense integers assigned in realization order; the root is
    node 0 with V = 0 and the virtual parent marker ``ROOT_PARENT``.  A
    brood is realized at most once and its children occupy contiguous ids,
    so the arena doubles as the data layout of the stepping kernel.
    """

    def __init__(
        self,
        law: OffspringLaw,
        seed: int | np.random.SeedSequence | np.random.Generator | None = None,
        population_cap: int = 10_000_000,
        initial_capacity: int = 1024,
    ):
        self.law = law
        self.population_cap = int(population_cap)
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.default_rng(seed)

        cap = max(int(initial_capacity), 4)
        self._parent = np.full(cap, ROOT_PARENT, dtype=np.int64)
        self._depth = np.zeros(cap, dtype=np.int32)
        self._V = np.zeros(cap, dtype=np.float64)
        self._first_child = np.full(cap, -1, dtype=np.int64)
        self._n_child = np.full(cap, -1, dtype=np.int32)
        # per-node transition cache, filled on demand by walker code
        self._p_up = np.zeros(cap, dtype=np.float64)
        self._ccum = np.zeros(cap, dtype=np.float64)
        self._tr_ready = np.zeros(cap, dtype=np.uint8)
        # node count lives in an array box so the stepping kernel can bump it
        self._count_box = np.ones(1, dtype=np.int64)

    # -- basic accessors ----------------------------------------------------

    @property
    def root(self) -> int:
        return 0

    @property
    def n_nodes(self) -> int:
        return int(self._count_box[0])

    def V(self, node_id: int) -> float:
        self._check(node_id)
        return float(self._V[node_id])

    def parent(self, node_id: int) -> int:
        self._check(node_id)
        return int(self._parent[node_id])

    def depth(self, node_id: int) -> int:
        self._check(node_id)
        return int(self._depth[node_id])

    def realized(self, node_id: int) -> bool:
        self._check(node_id)
        return self._n_child[node_id] >= 0

    def children(self, node_id: int) -> np.ndarray:
        """Child ids of a realized node (empty array for a childless brood)."""
        self._check(node_id)
        k = self._n_child[node_id]
        if k < 0:
            raise ValueError(f"children of node {node_id} not realized")
        f = self._first_child[node_id]
        return np.arange(f, f + k, dtype=np.int64)

    def node(self, node_id: int) -> Node:
        self._check(node_id)
        realized = self._n_child[node_id] >= 0
        return Node(
            id=int(node_id),
            parent=int(self._parent[node_id]),
            depth=int(self._depth[node_id]),
            V=float(self._V[node_id]),
            children=tuple(int(c) for c in self.children(node_id)) if realized else None,
            realized=realized,
        )

    def _check(self, node_id: int):
        if not (0 <= node_id < self._count_box[0]):
            raise IndexError(f"node {node_id} does not exist")

    # -- growth -------------------------------------------------------------

    def _ensure_capacity(self, extra: int):
        n = self.n_nodes
        need = n + extra
        cap = len(self._V)
        if need <= cap:
            return
        new_cap = max(need, 2 * cap)
        for name in ("_parent", "_depth", "_V", "_first_child", "_n_child",
                     "_p_up", "_ccum", "_tr_ready"):
            old = getattr(self, name)
            grown = np.empty(new_cap, dtype=old.dtype)
            grown[:n] = old[:n]
            if name in ("_first_child", "_n_child"):
                grown[n:] = -1
            elif name == "_tr_ready":
                grown[n:] = 0
            setattr(self, name, grown)

    def realize_children(self, node_id: int) -> np.ndarray:
        """Sample the brood of a node (idempotent: second call is a lookup)."""
        self._check(node_id)
        if self._n_child[node_id] >= 0:
            return self.children(node_id)
        disps = self.law.sample(self.rng)
        n = len(disps)
        if self.n_nodes + n > self.population_cap:
            raise PopulationCapError(
                f"realizing {n} children of node {node_id} would exceed the "
                f"population cap {self.population_cap}"
            )
        self._ensure_capacity(n)
        base = self.n_nodes
        self._first_child[node_id] = base
        self._n_child[node_id] = n
        if n:
            self._parent[base: base + n] = node_id
            self._depth[base: base + n] = self._depth[node_id] + 1
            self._V[base: base + n] = self._V[node_id] + disps
        self._count_box[0] = base + n
        return np.arange(base, base + n, dtype=np.int64)

    def realize_to_depth(
        self, depth: int, population_cap: int | None = None
    ) -> GenerationSizes:
        """Breadth-first realization of all generations up to ``depth``.

        Stops early (flagged, not raised) if the requested cap would be
        exceeded; the arena cap still raises if actually breached.
        """
        if depth < 0:
            raise ValueError("depth must be >= 0")
        cap = self.population_cap if population_cap is None else int(population_cap)
        sizes = [1]
        frontier = [self.root]
        for _ in range(depth):
            nxt: list[int] = []
            for u in frontier:
                if self._n_child[u] < 0:
                    if self.n_nodes >= cap:
                        return GenerationSizes(sizes=sizes, truncated=True)
                    try:
                        kids = self.realize_children(u)
                    except PopulationCapError:
                        return GenerationSizes(sizes=sizes, truncated=True)
                    if self.n_nodes > cap:
                        return GenerationSizes(sizes=sizes, truncated=True)
                else:
                    kids = self.children(u)
                nxt.extend(int(c) for c in kids)
            sizes.append(len(nxt))
            frontier = nxt
            if not frontier:
                break
        return GenerationSizes(sizes=sizes, truncated=False)

    # -- export ---------------------------------------------------------------

    def export(self, fileobj: io.TextIOBase | str) -> None:
        """Line-oriented dump of the realized arena: id, parent, depth, V."""
        close = False
        if isinstance(fileobj, str):
            fileobj = open(fileobj, "w")
            close = True
        try:
            fileobj.write("id,parent,depth,V\n")
            for i in range(self.n_nodes):
                fileobj.write(
                    f"{i},{self._parent[i]},{self._depth[i]},{float(self._V[i])!r}\n"
                )
        finally:
            if close:
                fileobj.close()

    def spawn_rng(self) -> np.random.Generator:
        """A fresh deterministic stream derived from this environment's RNG."""
        return self.rng.spawn(1)[0]
