"""Survival-conditioned path functionals of the centred walk.

The limit constants of the heavy-range law are integrals of two families
of conditioned-walk functionals:

* ``C0(a, b)``: the density-like limit of
  ``n * P(min >= 0, max <= (a+b)*sqrt(n), S_n in [b*sqrt(n), b*sqrt(n)+h))``
  normalised by ``c_plus * h / sigma`` — a Brownian-meander endpoint
  density with a ceiling constraint.
* ``C_ab(a, b)``: the limit of ``n * P(min >= 0, S_n is a strict running
  maximum, drawdowns <= a*sqrt(n), S_n >= b*sqrt(n))`` — the walk seen
  from its final maximum.

Both are estimated from one shared ensemble of surviving paths: paths are
sampled unconditionally, killed the moment they go negative, and the rare
survivors carry all the summaries every node of every quadrature needs.
Rejection is what makes this honest — no importance weights, no h-transform
that would itself depend on estimated quantities.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from gwtwalk.estimates import ConstantEstimate
from gwtwalk.onedim import _kernels
from gwtwalk.onedim.constants import WalkConstants, _child_rngs
from gwtwalk.onedim.laws import Walk1DLaw


@dataclasses.dataclass
class SurvivorEnsemble:
    """Paths of horizon ``n`` conditioned (by rejection) to stay >= -alpha.

    ``features`` rows are batch-contiguous: rows ``batch_slices[b]`` came
    from the ``b``-th independent stream, whose attempt count is
    ``attempts[b]``.  Every conditioned estimator reduces rows to
    per-batch sums, so uncertainty propagates by batch means no matter
    how many correlated quadrature nodes reuse the same paths.
    """

    law: Walk1DLaw
    n: int
    alpha: float
    features: np.ndarray
    batch_slices: list
    attempts: np.ndarray

    @property
    def n_batches(self) -> int:
        return len(self.batch_slices)

    @property
    def total_attempts(self) -> int:
        return int(self.attempts.sum())

    @property
    def acceptance_rate(self) -> float:
        return self.features.shape[0] / max(1, self.total_attempts)

    def batch_rates(self, row_values: np.ndarray) -> Tuple[float, np.ndarray]:
        """Pooled and per-batch means of per-row values over *attempts*.

        ``row_values`` has one entry per surviving row; killed paths count
        as zero, so dividing batch sums by batch attempts estimates the
        unconditional expectation of (value * survival indicator).
        """
        if row_values.shape[0] != self.features.shape[0]:
            raise ValueError("row_values must align with ensemble rows")
        per_batch = np.empty(self.n_batches)
        for b, (start, stop) in enumerate(self.batch_slices):
            per_batch[b] = row_values[start:stop].sum()
        pooled = float(row_values.sum() / self.total_attempts)
        return pooled, per_batch / self.attempts


def collect_survivors(
    law: Walk1DLaw,
    n: int,
    target: int = 40_000,
    rng: Optional[np.random.Generator] = None,
    alpha: float = 0.0,
    batches: int = 10,
    max_attempts: Optional[int] = None,
) -> SurvivorEnsemble:
    """Collect ``target`` surviving paths of horizon ``n``.

    Raises if nothing survives within the attempt budget, reporting the
    rejection rate so the caller can tell a too-harsh barrier from a bug.
    """
    if rng is None:
        rng = np.random.default_rng()
    if n < 100:
        raise ValueError("conditioned functionals need n >= 100")
    if target < batches * 10:
        raise ValueError("target too small for batch-means error estimates")
    kind, p0, p1 = law.kernel_params()
    per_batch_target = target // batches
    if max_attempts is None:
        # Survival odds scale like 1/sqrt(n); x50 headroom on the budget.
        max_attempts = int(50 * per_batch_target * math.sqrt(n))
    chunks = []
    slices = []
    attempts = np.zeros(batches, dtype=np.int64)
    start = 0
    for b, child in enumerate(_child_rngs(rng, batches)):
        out = np.empty((per_batch_target, _kernels.N_FEATURES))
        got, used = _kernels.survivor_features(
            max_attempts, int(n), kind, p0, p1, False, alpha, math.inf, out, child
        )
        if got == 0:
            raise RuntimeError(
                f"no surviving paths in {used} attempts at n={n} "
                f"(law {law.name!r}, alpha={alpha}); rejection rate 100%"
            )
        chunks.append(out[:got].copy())
        slices.append((start, start + got))
        start += got
        attempts[b] = used
    return SurvivorEnsemble(
        law=law,
        n=int(n),
        alpha=float(alpha),
        features=np.concatenate(chunks, axis=0),
        batch_slices=slices,
        attempts=attempts,
    )


def _require_continuous(ens: SurvivorEnsemble) -> None:
    if ens.law.lattice:
        raise ValueError(
            "window-based conditioned estimators need a continuous "
            f"increment law; {ens.law.name!r} is lattice-supported"
        )


def _as_ensemble(
    source: Union[Walk1DLaw, SurvivorEnsemble],
    n: Optional[int],
    replicas: int,
    rng: Optional[np.random.Generator],
) -> SurvivorEnsemble:
    if isinstance(source, SurvivorEnsemble):
        return source
    if n is None:
        n = 10_000
    return collect_survivors(source, n, target=replicas, rng=rng)


def _batch_values_of(est: ConstantEstimate, n_batches: int) -> np.ndarray:
    """Per-batch values of a constant, broadcast if it has none."""
    if est.batch_values is not None:
        vals = np.asarray(est.batch_values, dtype=float)
        if vals.size != n_batches:
            raise ValueError(
                f"batch count mismatch: constant has {vals.size}, "
                f"ensemble has {n_batches}"
            )
        return vals
    return np.full(n_batches, est.value)


def c0_node_values(
    ens: SurvivorEnsemble,
    a_nodes: np.ndarray,
    b_nodes: np.ndarray,
    c_plus: ConstantEstimate,
    h: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """``C0`` at many ``(a, b)`` nodes from one ensemble.

    Returns ``(values, batch_matrix)`` with shapes ``(nodes,)`` and
    ``(n_batches, nodes)``.  The renewal normalisation ``R(0) = 1`` is
    exact, so the estimator is ``n * sigma * P_hat / (c_plus * h)``.
    """
    _require_continuous(ens)
    if h <= 0:
        raise ValueError("window width h must be positive")
    a_nodes = np.atleast_1d(np.asarray(a_nodes, dtype=float))
    b_nodes = np.atleast_1d(np.asarray(b_nodes, dtype=float))
    if a_nodes.shape != b_nodes.shape:
        raise ValueError("a and b node arrays must align")
    if np.any(a_nodes <= 0) or np.any(b_nodes <= 0):
        raise ValueError("C0 nodes need a > 0 and b > 0")
    sqrt_n = math.sqrt(ens.n)
    end = ens.features[:, _kernels.F_END][:, None]
    high = ens.features[:, _kernels.F_MAX][:, None]
    lo = b_nodes[None, :] * sqrt_n
    ceil = (a_nodes + b_nodes)[None, :] * sqrt_n
    mask = (high <= ceil) & (end >= lo) & (end < lo + h)

    cp_batch = _batch_values_of(c_plus, ens.n_batches)
    scale = ens.n * ens.law.sigma / h
    counts = mask.sum(axis=0).astype(float)
    values = scale * (counts / ens.total_attempts) / c_plus.value
    batch_matrix = np.empty((ens.n_batches, a_nodes.size))
    for b, (start, stop) in enumerate(ens.batch_slices):
        cb = mask[start:stop].sum(axis=0) / ens.attempts[b]
        batch_matrix[b] = scale * cb / cp_batch[b]
    return values, batch_matrix


def c_ab_node_values(
    ens: SurvivorEnsemble,
    a_nodes: np.ndarray,
    b_nodes: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """``C_ab`` at many ``(a, b)`` nodes: strict final maximum, bounded
    drawdown, endpoint above ``b * sqrt(n)``.

    Normalised by ``R(alpha)``; ensembles collected at ``alpha = 0`` use
    the exact ``R(0) = 1``.
    """
    _require_continuous(ens)
    if ens.alpha != 0.0:
        raise ValueError(
            "C_ab estimator assumes an alpha=0 ensemble (R(0)=1 exact); "
            "renormalise explicitly for alpha > 0"
        )
    a_nodes = np.atleast_1d(np.asarray(a_nodes, dtype=float))
    b_nodes = np.atleast_1d(np.asarray(b_nodes, dtype=float))
    if a_nodes.shape != b_nodes.shape:
        raise ValueError("a and b node arrays must align")
    sqrt_n = math.sqrt(ens.n)
    end = ens.features[:, _kernels.F_END][:, None]
    prevmax = ens.features[:, _kernels.F_PREVMAX][:, None]
    maxdd = ens.features[:, _kernels.F_MAXDD][:, None]
    mask = (
        (end > prevmax)
        & (maxdd <= a_nodes[None, :] * sqrt_n)
        & (end >= b_nodes[None, :] * sqrt_n)
    )
    counts = mask.sum(axis=0).astype(float)
    values = ens.n * counts / ens.total_attempts
    batch_matrix = np.empty((ens.n_batches, a_nodes.size))
    for b, (start, stop) in enumerate(ens.batch_slices):
        batch_matrix[b] = ens.n * mask[start:stop].sum(axis=0) / ens.attempts[b]
    return values, batch_matrix


def _binomial_floor_se(ens: SurvivorEnsemble, scale: float) -> float:
    """SE floor for zero-hit node estimates: one hit's worth of mass."""
    return scale / ens.total_attempts


def estimate_C0(
    source: Union[Walk1DLaw, SurvivorEnsemble],
    a: float,
    b: float,
    c_plus: ConstantEstimate,
    h: Optional[float] = None,
    n: Optional[int] = None,
    replicas: int = 40_000,
    rng: Optional[np.random.Generator] = None,
) -> ConstantEstimate:
    """Estimate the meander endpoint-density functional ``C0(a, b)``.

    ``source`` may be a law (an ensemble is collected at horizon ``n``)
    or a pre-collected :class:`SurvivorEnsemble`.  The window width ``h``
    defaults to ``0.25 * sigma``; rerun with ``h/2`` to expose window
    bias (the quadratures downstream do this automatically).
    """
    ens = _as_ensemble(source, n, replicas, rng)
    if h is None:
        h = 0.25 * ens.law.sigma
    values, batch = c0_node_values(
        ens, np.array([a]), np.array([b]), c_plus, h
    )
    se = float(np.std(batch[:, 0], ddof=1) / math.sqrt(ens.n_batches))
    if values[0] == 0.0:
        se = max(se, _binomial_floor_se(ens, ens.n * ens.law.sigma / (h * c_plus.value)))
    return ConstantEstimate(
        value=float(values[0]),
        se=se,
        samples=ens.total_attempts,
        method="meander-endpoint-density",
        params={
            "a": a,
            "b": b,
            "h": h,
            "n": ens.n,
            "law": ens.law.name,
            "survivors": int(ens.features.shape[0]),
            "acceptance_rate": ens.acceptance_rate,
        },
        batch_values=[float(v) for v in batch[:, 0]],
    )


def estimate_C_ab(
    source: Union[Walk1DLaw, SurvivorEnsemble],
    a: float,
    b: float,
    alpha: float = 0.0,
    n: Optional[int] = None,
    replicas: int = 40_000,
    rng: Optional[np.random.Generator] = None,
) -> ConstantEstimate:
    """Estimate the strict-final-maximum functional ``C_ab(a, b)``."""
    if alpha != 0.0:
        raise NotImplementedError(
            "only the alpha=0 normalisation (R(0)=1) is implemented"
        )
    ens = _as_ensemble(source, n, replicas, rng)
    values, batch = c_ab_node_values(ens, np.array([a]), np.array([b]))
    se = float(np.std(batch[:, 0], ddof=1) / math.sqrt(ens.n_batches))
    if values[0] == 0.0:
        se = max(se, _binomial_floor_se(ens, float(ens.n)))
    return ConstantEstimate(
        value=float(values[0]),
        se=se,
        samples=ens.total_attempts,
        method="strict-final-max",
        params={
            "a": a,
            "b": b,
            "alpha": alpha,
            "n": ens.n,
            "law": ens.law.name,
            "survivors": int(ens.features.shape[0]),
            "acceptance_rate": ens.acceptance_rate,
        },
        batch_values=[float(v) for v in batch[:, 0]],
    )


def _logistic_grid(t_span: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature grid for ``int_0^1 f(u) du/(u(1-u))`` via ``u = 1/(1+e^-t)``.

    Returns ``(u_nodes, dt_weights)``; the Jacobian cancels the endpoint
    singularities exactly, so the weights are uniform in ``t``.
    """
    t = np.arange(-t_span, t_span + 0.5 * dt, dt)
    u = 1.0 / (1.0 + np.exp(-t))
    return u, np.full(t.size, dt)


def g_integrand_values(
    ens: SurvivorEnsemble,
    a: float,
    b: float,
    u_nodes: np.ndarray,
    constants: WalkConstants,
    h: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrand of ``G(a, b)`` on ``u_nodes`` (without quadrature weights).

    ``G(a,b) = int_0^1 C_ab(a/sqrt(u), a/sqrt(u)) * (c_minus/sigma)
    * C0((a-b)/sqrt(1-u), b/sqrt(1-u)) du/(u(1-u))`` for ``a > b``; the
    returned values already absorb ``c_minus/sigma`` but not the measure.
    """
    if h is None:
        h = 0.25 * ens.law.sigma
    u = np.asarray(u_nodes, dtype=float)
    ca_vals, ca_batch = c_ab_node_values(
        ens, a / np.sqrt(u), a / np.sqrt(u)
    )
    c0_vals, c0_batch = c0_node_values(
        ens,
        (a - b) / np.sqrt(1.0 - u),
        b / np.sqrt(1.0 - u),
        constants.c_plus,
        h,
    )
    cm_batch = _batch_values_of(constants.c_minus, ens.n_batches)
    sigma = ens.law.sigma
    values = ca_vals * (constants.c_minus.value / sigma) * c0_vals
    batch = ca_batch * (cm_batch[:, None] / sigma) * c0_batch
    return values, batch


def estimate_G(
    source: Union[Walk1DLaw, SurvivorEnsemble],
    a: float,
    b: float,
    constants: WalkConstants,
    t_span: float = 9.0,
    dt: float = 0.5,
    h: Optional[float] = None,
    n: Optional[int] = None,
    replicas: int = 40_000,
    rng: Optional[np.random.Generator] = None,
) -> ConstantEstimate:
    """Estimate the two-sided functional ``G(a, b)``.

    Exactly 0 when ``a <= b`` (the defining indicator).  The ``u``
    integral runs over a logistic grid; both endpoint tails decay through
    the conditioned functionals, and the realised tail fraction is
    recorded in the notes.
    """
    if a <= b:
        return ConstantEstimate(
            value=0.0,
            se=0.0,
            method="two-sided-functional",
            params={"a": a, "b": b, "reason": "indicator a > b"},
        )
    ens = _as_ensemble(source, n, replicas, rng)
    u_nodes, weights = _logistic_grid(t_span, dt)
    values, batch = g_integrand_values(ens, a, b, u_nodes, constants, h=h)
    total = float(values @ weights)
    batch_totals = batch @ weights
    edge = float(
        (values[:2] @ weights[:2]) + (values[-2:] @ weights[-2:])
    )
    se = float(np.std(batch_totals, ddof=1) / math.sqrt(ens.n_batches))
    notes = ""
    if total > 0 and edge > 0.01 * total:
        notes = f"endpoint tail fraction {edge / total:.3f} exceeds 1%"
    return ConstantEstimate(
        value=total,
        se=se,
        samples=ens.total_attempts,
        method="two-sided-functional",
        params={
            "a": a,
            "b": b,
            "t_span": t_span,
            "dt": dt,
            "nodes": int(u_nodes.size),
            "n": ens.n,
            "law": ens.law.name,
        },
        notes=notes,
        batch_values=[float(v) for v in batch_totals],
    )
