"""Single-path simulation with numerically careful summaries."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
from scipy.special import logsumexp


@dataclasses.dataclass(frozen=True)
class WalkSummary:
    """One-pass summary of a walk ``S_0 = 0, S_1, ..., S_n``.

    The exponential functionals are stored in log domain because on long
    horizons ``exp(±S_k)`` overflows double precision long before the
    quantities themselves stop being meaningful.

    Attributes
    ----------
    n:
        Horizon (number of steps).
    end, high, low:
        ``S_n``, ``max_k S_k`` and ``min_k S_k`` (the ``k = 0`` term is
        included in both extrema).
    argmax:
        First index attaining the maximum.
    log_sum_exp_neg:
        ``log sum_k exp(-S_k)``.
    log_sum_exp_gap:
        ``log sum_k exp(S_k - high)``.
    log_h:
        ``log H_n`` for ``H_n = sum_k exp(S_k - S_n)``, the path-weight
        functional that controls edge traversal counts on the tree side.
    """

    n: int
    end: float
    high: float
    low: float
    argmax: int
    log_sum_exp_neg: float
    log_sum_exp_gap: float
    log_h: float

    @property
    def h(self) -> float:
        return math.exp(self.log_h) if self.log_h < 700.0 else math.inf


def simulate_walk(law, n: int, rng: Optional[np.random.Generator] = None) -> WalkSummary:
    """Simulate ``n`` steps of ``law`` and summarise the path.

    ``n = 0`` returns the degenerate summary of the single-point path
    (``H_0 = 1``).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    if n == 0:
        return WalkSummary(
            n=0,
            end=0.0,
            high=0.0,
            low=0.0,
            argmax=0,
            log_sum_exp_neg=0.0,
            log_sum_exp_gap=0.0,
            log_h=0.0,
        )
    steps = law.sample(rng, size=n)
    path = np.empty(n + 1)
    path[0] = 0.0
    np.cumsum(steps, out=path[1:])
    high = float(path.max())
    argmax = int(path.argmax())
    return WalkSummary(
        n=n,
        end=float(path[-1]),
        high=high,
        low=float(path.min()),
        argmax=argmax,
        log_sum_exp_neg=float(logsumexp(-path)),
        log_sum_exp_gap=float(logsumexp(path - high)),
        log_h=float(logsumexp(path - path[-1])),
    )
