"""Compiled Monte Carlo kernels for one-dimensional centred walks.

All kernels draw steps inline from a ``(kind, p0, p1)`` law tag (see
``laws.KIND_*``) so the hot loops never call back into Python.  Paths that
fall below a kill barrier are abandoned immediately, which is what makes
survival-conditioned sampling affordable: an attempt of horizon ``n`` costs
``O(sqrt(n))`` steps on average instead of ``O(n)``.
"""

from __future__ import annotations

import math

import numpy as np

from gwtwalk._kernel import njit

# Feature-row layout produced by ``survivor_features``.
F_END = 0        # S_n
F_MAX = 1        # max of S_0..S_n
F_PREVMAX = 2    # max of S_0..S_{n-1}
F_MAXDD = 3      # max_k (running max - S_k), the deepest drawdown
F_SUMEXPNEG = 4  # sum_{k=0..n} exp(-S_k)
F_COUNT = 5      # #{1 <= k <= n : S_k >= thr}
N_FEATURES = 6


@njit(cache=True)
def _step(kind, p0, p1, rng):
    if kind == 0:  # gaussian
        return p0 * rng.standard_normal()
    if kind == 1:  # uniform
        return p0 * (2.0 * rng.random() - 1.0)
    if kind == 2:  # uniform + gaussian mixture
        return (2.0 * rng.random() - 1.0) + p0 * rng.standard_normal()
    # rademacher
    if rng.random() < 0.5:
        return 1.0
    return -1.0


@njit(cache=True)
def survival_count(attempts, n, kind, p0, p1, flip, alpha, rng):
    """Count paths with ``min_{0<=k<=n} S_k >= -alpha``.

    ``flip`` negates every step, turning the estimate into the mirrored
    probability ``P(max S_k <= alpha)`` for the original law.
    """
    alive = 0
    for _ in range(attempts):
        s = 0.0
        ok = True
        for _ in range(n):
            x = _step(kind, p0, p1, rng)
            if flip:
                x = -x
            s += x
            if s < -alpha:
                ok = False
                break
        if ok:
            alive += 1
    return alive


@njit(cache=True)
def survivor_features(max_attempts, n, kind, p0, p1, flip, alpha, thr, out, rng):
    """Collect per-path summaries of paths that never go below ``-alpha``.

    Fills rows of ``out`` (shape ``(cap, N_FEATURES)``) with
    ``[S_n, max, prev_max, max_drawdown, sum(exp(-S_k)), count(S_k >= thr)]``
    for each surviving path, stopping at ``max_attempts`` attempts or when
    ``out`` is full, whichever comes first.

    Returns ``(collected, attempts_used)``.  ``collected / attempts_used``
    is the survival-probability estimate; conditional functionals are
    averages over the collected rows.
    """
    cap = out.shape[0]
    got = 0
    used = 0
    while used < max_attempts and got < cap:
        used += 1
        s = 0.0
        smax = 0.0
        sprevmax = 0.0
        maxdd = 0.0
        sumexpneg = 1.0
        count = 0.0
        ok = True
        for k in range(n):
            x = _step(kind, p0, p1, rng)
            if flip:
                x = -x
            if k == n - 1:
                sprevmax = smax
            s += x
            if s < -alpha:
                ok = False
                break
            if s > smax:
                smax = s
            dd = smax - s
            if dd > maxdd:
                maxdd = dd
            sumexpneg += math.exp(-s)
            if s >= thr:
                count += 1.0
        if ok:
            out[got, F_END] = s
            out[got, F_MAX] = smax
            out[got, F_PREVMAX] = sprevmax
            out[got, F_MAXDD] = maxdd
            out[got, F_SUMEXPNEG] = sumexpneg
            out[got, F_COUNT] = count
            got += 1
    return got, used


@njit(cache=True)
def discounted_survival_sum(n_paths, x, beta, nmax, kind, p0, p1, out, rng):
    """Per-path ``sum_k exp(-beta * S_k)`` while the walk started at ``x``
    stays nonnegative, truncated at ``nmax`` steps.

    Simulated as a walk from 0 killed below ``-x``; the accumulated weight
    uses the shifted position ``x + S_k``.
    """
    for i in range(n_paths):
        s = 0.0
        acc = math.exp(-beta * x)
        for _ in range(nmax):
            stp = _step(kind, p0, p1, rng)
            s += stp
            if s < -x:
                break
            acc += math.exp(-beta * (x + s))
        out[i] = acc


@njit(cache=True)
def exp_below_cap_series(n_paths, cap_a, nmax, kind, p0, p1, out, rng):
    """Per-path ``sum_n exp(S_n - A) * 1{S_n <= A}`` over the lifetime of a
    walk killed below 0, truncated at ``nmax`` steps."""
    for i in range(n_paths):
        s = 0.0
        acc = math.exp(-cap_a)
        for _ in range(nmax):
            stp = _step(kind, p0, p1, rng)
            s += stp
            if s < 0.0:
                break
            if s <= cap_a:
                acc += math.exp(s - cap_a)
        out[i] = acc


@njit(cache=True)
def ladder_heights(max_steps, kind, p0, p1, out, rng):
    """Harvest strict descending ladder heights from one long walk.

    Each time the walk reaches a new strict minimum, the drop from the
    previous minimum is recorded.  Successive drops are i.i.d. copies of
    the ladder-height distribution, so a single long walk yields a clean
    sample pool.  Returns the number of heights written to ``out``.
    """
    cap = out.shape[0]
    count = 0
    s = 0.0
    cur_min = 0.0
    for _ in range(max_steps):
        s += _step(kind, p0, p1, rng)
        if s < cur_min:
            out[count] = cur_min - s
            count += 1
            cur_min = s
            if count == cap:
                break
    return count


@njit(cache=True)
def window_visit_sums(
    n_paths, klim, kind, p0, p1, alpha, lo, hi, discounted, out, rng
):
    """Per-path ``sum_{k=1..klim} w_k * 1{min_{j<=k} S_j >= -alpha,
    S_k in [lo, hi)}`` with ``w_k = sum_{i<=k} exp(-S_i)`` when
    ``discounted`` else 1.

    The path is killed (no further contributions) once it dips below
    ``-alpha``.
    """
    for i in range(n_paths):
        s = 0.0
        acc = 0.0
        w = 1.0  # sum_{i<=k} exp(-S_i), including the k=0 term
        for _ in range(klim):
            s += _step(kind, p0, p1, rng)
            if s < -alpha:
                break
            w += math.exp(-s)
            if lo <= s < hi:
                if discounted:
                    acc += w
                else:
                    acc += 1.0
        out[i] = acc


@njit(cache=True)
def drawdown_window_visit_sums(
    n_paths, klim, kind, p0, p1, max_floor, gap_lo, gap_hi, out, rng
):
    """Per-path ``sum_{k=1..klim} 1{min >= 0, max_k >= max_floor,
    max_k - S_k in [gap_lo, gap_hi)}`` with kill below 0."""
    for i in range(n_paths):
        s = 0.0
        smax = 0.0
        acc = 0.0
        for _ in range(klim):
            s += _step(kind, p0, p1, rng)
            if s < 0.0:
                break
            if s > smax:
                smax = s
            if smax >= max_floor:
                gap = smax - s
                if gap_lo <= gap < gap_hi:
                    acc += 1.0
        out[i] = acc
