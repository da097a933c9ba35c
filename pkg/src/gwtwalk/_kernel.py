"""Compiled stepping kernel for excursions of the biased walk.

One resumable state machine runs excursions rho* -> rho -> ... -> rho* over
the flat tree arena, maintaining edge local times, excursion-visit counts
(via epoch stamps) and step counters.  The kernel realizes broods inline for
laws it understands (Gaussian-binary, discrete tables) and suspends back to
Python for anything it cannot do itself: growing the arrays, generic-law
sampling, or cap handling.

The walk stream and the environment stream are separate generators; numba's
``np.random.Generator`` support is bit-compatible with numpy, so interleaved
kernel/Python realization produces identical trees for identical seeds.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly by every walker test
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# status codes returned by the kernel
DONE = 0
NEED_CAPACITY = 1
NEED_CHILDREN = 2
CAP_EXCURSION = 3
CAP_TOTAL = 4
POP_CAP = 5

# state_box layout
S_CUR = 0            # current node id, -1 = resting at rho*
S_EXC_DONE = 1       # completed excursions
S_STEPS = 2          # total steps over all excursions
S_STEPS_EXC = 3      # steps inside the current excursion
S_NEED = 4           # node whose children are required (status NEED_CHILDREN)
S_MAX_DEPTH = 5      # deepest node visited so far
S_VISITED_EXC = 6    # distinct nodes visited in the current excursion
S_LAST_VISITED = 7   # distinct nodes visited in the most recently finished excursion

# law kind codes (mirrors environment.KERNEL_LAW_*)
_LAW_GENERIC = 0
_LAW_GAUSSIAN_BINARY = 1
_LAW_DISCRETE = 2


@njit(cache=True)
def _run_excursions(
    n_target,
    # arena
    parent, depth, V, first_child, n_child, node_count_box, population_cap,
    # law
    law_kind, law_f, law_i,
    # transition cache
    p_up, ccum, tr_ready,
    # record
    lbar, ecnt, stamp, exc_lengths,
    # state + caps
    state, cap_steps_exc, cap_steps_total,
    rng_env, rng_walk,
):
    capacity = V.shape[0]
    cur = state[S_CUR]
    n_done = state[S_EXC_DONE]
    total_steps = state[S_STEPS]
    steps_exc = state[S_STEPS_EXC]
    max_depth = state[S_MAX_DEPTH]
    visited_exc = state[S_VISITED_EXC]
    last_visited = state[S_LAST_VISITED]

    if law_kind == _LAW_GAUSSIAN_BINARY:
        max_brood = 2
    elif law_kind == _LAW_DISCRETE:
        n_rows = law_i[0]
        max_brood = 0
        for r in range(n_rows):
            w = law_i[1 + r + 1] - law_i[1 + r]
            if w > max_brood:
                max_brood = w
    else:
        max_brood = 0

    while n_done < n_target:
        if cur == -1:
            # forced entry rho* -> rho starts the next excursion
            if total_steps >= cap_steps_total:
                break
            cur = 0
            steps_exc = 1
            total_steps += 1
            visited_exc = 1
            lbar[0] += 1
            exc_idx = n_done + 1
            if stamp[0] != exc_idx:
                stamp[0] = exc_idx
                ecnt[0] += 1

        exc_idx = n_done + 1

        # make sure the brood of `cur` exists before sampling a move
        if n_child[cur] < 0:
            if law_kind == _LAW_GENERIC:
                state[S_CUR] = cur
                state[S_EXC_DONE] = n_done
                state[S_STEPS] = total_steps
                state[S_STEPS_EXC] = steps_exc
                state[S_MAX_DEPTH] = max_depth
                state[S_VISITED_EXC] = visited_exc
                state[S_LAST_VISITED] = last_visited
                state[S_NEED] = cur
                return NEED_CHILDREN
            n_nodes = node_count_box[0]
            if n_nodes + max_brood > capacity:
                state[S_CUR] = cur
                state[S_EXC_DONE] = n_done
                state[S_STEPS] = total_steps
                state[S_STEPS_EXC] = steps_exc
                state[S_MAX_DEPTH] = max_depth
                state[S_VISITED_EXC] = visited_exc
                state[S_LAST_VISITED] = last_visited
                return NEED_CAPACITY
            row = 0
            if law_kind == _LAW_GAUSSIAN_BINARY:
                brood = 2
            else:
                # discrete table: one uniform picks the row
                u = rng_env.random()
                n_rows = law_i[0]
                row = n_rows - 1
                for r in range(n_rows):
                    if u < law_f[r]:
                        row = r
                        break
                brood = law_i[1 + row + 1] - law_i[1 + row]
            if n_nodes + brood > population_cap:
                state[S_CUR] = cur
                state[S_EXC_DONE] = n_done
                state[S_STEPS] = total_steps
                state[S_STEPS_EXC] = steps_exc
                state[S_MAX_DEPTH] = max_depth
                state[S_VISITED_EXC] = visited_exc
                state[S_LAST_VISITED] = last_visited
                return POP_CAP
            first_child[cur] = n_nodes
            n_child[cur] = brood
            d = depth[cur] + 1
            if law_kind == _LAW_GAUSSIAN_BINARY:
                mu = law_f[0]
                sd = law_f[1]
                for j in range(2):
                    V[n_nodes + j] = V[cur] + rng_env.normal(mu, sd)
                    parent[n_nodes + j] = cur
                    depth[n_nodes + j] = d
            else:
                n_rows = law_i[0]
                off = law_i[1 + row]
                for j in range(brood):
                    V[n_nodes + j] = V[cur] + law_f[n_rows + off + j]
                    parent[n_nodes + j] = cur
                    depth[n_nodes + j] = d
            node_count_box[0] = n_nodes + brood

        # transition cache: weights relative to e^{-V(cur)}, log-sum-exp form
        if tr_ready[cur] == 0:
            k = n_child[cur]
            f = first_child[cur]
            m = 0.0
            for j in range(k):
                w = V[cur] - V[f + j]
                if w > m:
                    m = w
            denom = math.exp(-m)
            for j in range(k):
                denom += math.exp(V[cur] - V[f + j] - m)
            p_up[cur] = math.exp(-m) / denom
            acc = p_up[cur]
            for j in range(k):
                acc += math.exp(V[cur] - V[f + j] - m) / denom
                ccum[f + j] = acc
            tr_ready[cur] = 1

        if steps_exc >= cap_steps_exc:
            state[S_CUR] = cur
            state[S_EXC_DONE] = n_done
            state[S_STEPS] = total_steps
            state[S_STEPS_EXC] = steps_exc
            state[S_MAX_DEPTH] = max_depth
            state[S_VISITED_EXC] = visited_exc
            state[S_LAST_VISITED] = last_visited
            return CAP_EXCURSION
        if total_steps >= cap_steps_total:
            state[S_CUR] = cur
            state[S_EXC_DONE] = n_done
            state[S_STEPS] = total_steps
            state[S_STEPS_EXC] = steps_exc
            state[S_MAX_DEPTH] = max_depth
            state[S_VISITED_EXC] = visited_exc
            state[S_LAST_VISITED] = last_visited
            return CAP_TOTAL

        r = rng_walk.random()
        if r < p_up[cur]:
            nxt = parent[cur]
            total_steps += 1
            steps_exc += 1
            if nxt == -1:
                exc_lengths[n_done] = steps_exc
                n_done += 1
                steps_exc = 0
                last_visited = visited_exc
                visited_exc = 0
                cur = -1
            else:
                cur = nxt
        else:
            k = n_child[cur]
            f = first_child[cur]
            child = f + k - 1
            for j in range(k):
                if r <= ccum[f + j]:
                    child = f + j
                    break
            total_steps += 1
            steps_exc += 1
            lbar[child] += 1
            if stamp[child] != exc_idx:
                stamp[child] = exc_idx
                ecnt[child] += 1
                visited_exc += 1
            if depth[child] > max_depth:
                max_depth = depth[child]
            cur = child

    state[S_CUR] = cur
    state[S_EXC_DONE] = n_done
    state[S_STEPS] = total_steps
    state[S_STEPS_EXC] = steps_exc
    state[S_MAX_DEPTH] = max_depth
    state[S_VISITED_EXC] = visited_exc
    state[S_LAST_VISITED] = last_visited
    if n_done >= n_target:
        return DONE
    return CAP_TOTAL


# public alias for the driver in walker.py
run_excursions = _run_excursions
