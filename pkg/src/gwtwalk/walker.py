"""The quenched nearest-neighbour walk, organised by excursions from the root.

Given a realized (or lazily realized) tree environment, the walk starts at the
parentless anchor above the root and moves to a neighbour of its current
vertex with conductance weights ``e^{-V(.)}``: from ``x`` it steps to the
parent with probability proportional to ``e^{-V(x)}`` and to a child ``y``
with probability proportional to ``e^{-V(y)}``.  Time is counted in
excursions: the walk is returned to the anchor, forced back into the root,
and run until it next sits on the anchor.  All per-vertex tallies (edge local
times, excursion counts, first-visit epochs) are accumulated in a
:class:`WalkRecord`, and the heavy lifting happens in a compiled kernel that
realizes fresh tree vertices on demand from the environment's own stream.

The module-level :func:`transition` mirrors the kernel's transition rule in
plain Python (filling the same cache), which makes the stepping rule unit
testable without running any excursions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .environment import Environment, PopulationCapError
from .estimates import ConstantEstimate

__all__ = [
    "StepCapPolicy",
    "StepCapExceeded",
    "ExcursionSummary",
    "WalkRecord",
    "transition",
    "run_excursion",
    "run_n_excursions",
    "estimate_hitting_probability",
    "export_record",
]


class StepCapExceeded(RuntimeError):
    """A step budget was exhausted under the "abort-replica" policy."""


@dataclass
class StepCapPolicy:
    """Budgets guarding against near-trap excursions that never end.

    ``on_breach`` selects what happens when a budget is hit:

    - ``"abort-replica"`` (default): raise :class:`StepCapExceeded`;
    - ``"record-truncation"``: stop stepping, flag the record as truncated
      and leave all tallies as they stand (the current excursion is then
      incomplete and is *not* counted in ``n_excursions``).
    """

    max_steps_per_excursion: int = 10 ** 8
    max_steps_total: int = 10 ** 9
    on_breach: str = "abort-replica"

    def __post_init__(self) -> None:
        if self.on_breach not in ("abort-replica", "record-truncation"):
            raise ValueError(f"unknown on_breach policy {self.on_breach!r}")
        if self.max_steps_per_excursion <= 0 or self.max_steps_total <= 0:
            raise ValueError("step budgets must be positive")


@dataclass
class ExcursionSummary:
    """What one completed excursion did."""

    length: int           # steps from leaving the anchor to returning to it
    nodes_visited: int    # distinct tree vertices visited (root included)
    truncated: bool       # True if a step budget cut the excursion short


class WalkRecord:
    """Mutable tallies of one walk over one environment.

    The record owns the walk RNG stream; the environment keeps its own, so
    the walk never perturbs how broods are drawn.  Because the environment
    stream is consumed in realization order, two different walks materialize
    the same seed into different concrete trees — but broods are i.i.d., so
    the environment law (and anything averaged over it) is unaffected by
    exploration order.  Replays with the same walk seed reproduce exactly.
    """

    def __init__(self, env: Environment, rng=None):
        self.env = env
        if rng is None:
            rng = env.spawn_rng()
        elif not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.rng = rng
        cap = len(env._V)
        # per-vertex tallies, indexed like the environment arena
        self._lbar = np.zeros(cap, dtype=np.int64)
        self._ecnt = np.zeros(cap, dtype=np.int64)
        self._stamp = np.zeros(cap, dtype=np.int64)
        self._state = np.zeros(8, dtype=np.int64)
        self._state[_kernel.S_CUR] = -1
        self._exc_lengths = np.zeros(0, dtype=np.int64)
        self.truncated = False
        self.truncation_reason = ""

    # -- bookkeeping ------------------------------------------------------

    def _sync_capacity(self) -> None:
        cap = len(self.env._V)
        if len(self._lbar) >= cap:
            return
        for name in ("_lbar", "_ecnt", "_stamp"):
            old = getattr(self, name)
            grown = np.zeros(cap, dtype=np.int64)
            grown[: len(old)] = old
            setattr(self, name, grown)

    # -- accessors ---------------------------------------------------------

    @property
    def n_excursions(self) -> int:
        """Completed excursions so far."""
        return int(self._state[_kernel.S_EXC_DONE])

    @property
    def tau(self) -> int:
        """Total steps taken (equals the sum of excursion lengths when the
        walk is sitting on the anchor)."""
        return int(self._state[_kernel.S_STEPS])

    @property
    def at_anchor(self) -> bool:
        return int(self._state[_kernel.S_CUR]) == -1

    @property
    def max_depth_reached(self) -> int:
        return int(self._state[_kernel.S_MAX_DEPTH])

    @property
    def excursion_lengths(self) -> np.ndarray:
        return self._exc_lengths[: self.n_excursions].copy()

    def local_time(self, node_id: int) -> int:
        """Edge local time: entries into ``node_id`` from its parent."""
        self.env._check(node_id)
        return int(self._lbar[node_id])

    def excursion_count(self, node_id: int) -> int:
        """Number of completed-or-current excursions that visited the node."""
        self.env._check(node_id)
        return int(self._ecnt[node_id])

    def local_time_table(self) -> dict[int, tuple[int, int]]:
        """``{node_id: (local_time, excursion_count)}`` over visited nodes."""
        n = self.env.n_nodes
        visited = np.nonzero(self._lbar[:n])[0]
        return {
            int(i): (int(self._lbar[i]), int(self._ecnt[i])) for i in visited
        }


# -- transition rule ----------------------------------------------------------


def _fill_transition_cache(env: Environment, node_id: int) -> None:
    """Populate ``p_up``/cumulative-child rows for ``node_id``.

    Must mirror the compiled kernel exactly (same summation order) so the
    two paths are interchangeable step for step.
    """
    kids = env.children(node_id)
    v0 = float(env._V[node_id])
    m = 0.0
    for c in kids:
        d = v0 - float(env._V[c])
        if d > m:
            m = d
    denom = math.exp(-m)
    for c in kids:
        denom += math.exp(v0 - float(env._V[c]) - m)
    env._p_up[node_id] = math.exp(-m) / denom
    acc = env._p_up[node_id]
    for c in kids:
        acc += math.exp(v0 - float(env._V[c]) - m) / denom
        env._ccum[c] = acc
    env._tr_ready[node_id] = 1


def transition(env: Environment, node_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Neighbours of ``node_id`` and the walk's move probabilities.

    Returns ``(targets, probs)`` with the parent first (omitted for the
    root's parentless anchor, where the move back into the root is forced).
    Children are realized on demand.  Probabilities are exact relative
    conductances ``e^{-V}`` of the neighbours, computed in a shifted
    (overflow-safe) form, and sum to 1 within float rounding.
    """
    if node_id == -1:
        return np.array([0], dtype=np.int64), np.array([1.0])
    env._check(node_id)
    if env._n_child[node_id] < 0:
        env.realize_children(node_id)
    if not env._tr_ready[node_id]:
        _fill_transition_cache(env, node_id)
    kids = env.children(node_id)
    targets = np.empty(1 + len(kids), dtype=np.int64)
    targets[0] = env.parent(node_id)
    targets[1:] = kids
    probs = np.empty(1 + len(kids))
    probs[0] = env._p_up[node_id]
    prev = probs[0]
    for j, c in enumerate(kids):
        probs[1 + j] = env._ccum[c] - prev
        prev = env._ccum[c]
    return targets, probs


# -- driving the kernel --------------------------------------------------------


def _drive(record: WalkRecord, n_target: int, policy: StepCapPolicy) -> None:
    """Run the kernel until ``n_target`` excursions are complete."""
    env = record.env
    if record.truncated:
        raise StepCapExceeded(
            f"record already truncated ({record.truncation_reason}); "
            "start a fresh WalkRecord"
        )
    if n_target > len(record._exc_lengths):
        grown = np.zeros(n_target, dtype=np.int64)
        grown[: len(record._exc_lengths)] = record._exc_lengths
        record._exc_lengths = grown
    law_kind, law_f, law_i = env.law.kernel_spec()
    law_f = np.asarray(law_f, dtype=np.float64)
    law_i = np.asarray(law_i, dtype=np.int64)
    while True:
        record._sync_capacity()
        status = _kernel.run_excursions(
            n_target,
            env._parent, env._depth, env._V,
            env._first_child, env._n_child,
            env._count_box, env.population_cap,
            law_kind, law_f, law_i,
            env._p_up, env._ccum, env._tr_ready,
            record._lbar, record._ecnt, record._stamp,
            record._exc_lengths, record._state,
            policy.max_steps_per_excursion, policy.max_steps_total,
            env.rng, record.rng,
        )
        if status == _kernel.DONE:
            return
        if status == _kernel.NEED_CAPACITY:
            env._ensure_capacity(max(64, env.law.max_brood()))
            continue
        if status == _kernel.NEED_CHILDREN:
            env.realize_children(int(record._state[_kernel.S_NEED]))
            continue
        if status == _kernel.POP_CAP:
            raise PopulationCapError(
                f"walk tried to grow the tree past the population cap "
                f"{env.population_cap}"
            )
        # a step budget was hit
        which = (
            "per-excursion"
            if status == _kernel.CAP_EXCURSION
            else "total"
        )
        msg = (
            f"{which} step budget exhausted after {record.tau} steps "
            f"({record.n_excursions} completed excursions)"
        )
        if policy.on_breach == "abort-replica":
            raise StepCapExceeded(msg)
        record.truncated = True
        record.truncation_reason = msg
        return


def run_n_excursions(
    record: WalkRecord, n: int, policy: StepCapPolicy | None = None
) -> WalkRecord:
    """Advance the record by ``n`` additional complete excursions."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if policy is None:
        policy = StepCapPolicy()
    _drive(record, record.n_excursions + n, policy)
    return record


def run_excursion(
    record: WalkRecord, policy: StepCapPolicy | None = None
) -> ExcursionSummary:
    """Run one more excursion and summarise it."""
    before = record.n_excursions
    run_n_excursions(record, 1, policy)
    if record.n_excursions == before:  # truncated under "record-truncation"
        return ExcursionSummary(
            length=int(record._state[_kernel.S_STEPS_EXC]),
            nodes_visited=int(record._state[_kernel.S_VISITED_EXC]),
            truncated=True,
        )
    return ExcursionSummary(
        length=int(record._exc_lengths[before]),
        nodes_visited=int(record._state[_kernel.S_LAST_VISITED]),
        truncated=False,
    )


# -- derived quantities ---------------------------------------------------------


def estimate_hitting_probability(
    env: Environment,
    node_id: int,
    n_excursions: int,
    rng=None,
    policy: StepCapPolicy | None = None,
) -> ConstantEstimate:
    """Fraction of excursions that visit ``node_id``, with binomial error.

    Runs a fresh walk (fresh stream) on the given environment for
    ``n_excursions`` excursions and reports the empirical per-excursion
    hitting frequency of the node.
    """
    env._check(node_id)
    record = WalkRecord(env, rng=rng)
    run_n_excursions(record, n_excursions, policy)
    hits = record.excursion_count(node_id)
    p = hits / n_excursions
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_excursions) / n_excursions)
    return ConstantEstimate(
        value=p,
        se=se,
        samples=n_excursions,
        method="excursion-mc",
        params={"node": int(node_id), "n_excursions": int(n_excursions)},
    )


# -- export ---------------------------------------------------------------------


def export_record(
    record: WalkRecord,
    fileobj: io.TextIOBase | str,
    metadata: dict | None = None,
) -> None:
    """Dump a walk record: one JSON metadata line, then per-vertex CSV rows.

    The metadata line (prefixed ``#``) carries the run summary (and whatever
    the caller adds, e.g. seeds); the CSV body has one row per realized
    vertex: id, parent, depth, potential, local time, excursion count.
    """
    close = False
    if isinstance(fileobj, str):
        fileobj = open(fileobj, "w", newline="")
        close = True
    try:
        meta = {
            "n_excursions": record.n_excursions,
            "total_steps": record.tau,
            "max_depth_reached": record.max_depth_reached,
            "n_nodes": record.env.n_nodes,
            "truncated": record.truncated,
        }
        if record.truncated:
            meta["truncation_reason"] = record.truncation_reason
        if metadata:
            meta.update(metadata)
        fileobj.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fileobj)
        writer.writerow(
            ["id", "parent", "depth", "V", "local_time", "excursion_count"]
        )
        env = record.env
        n = env.n_nodes
        for i in range(n):
            writer.writerow(
                [
                    i,
                    int(env._parent[i]),
                    int(env._depth[i]),
                    repr(float(env._V[i])),
                    int(record._lbar[i]),
                    int(record._ecnt[i]),
                ]
            )
    finally:
        if close:
            fileobj.close()
