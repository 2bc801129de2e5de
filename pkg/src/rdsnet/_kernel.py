"""Compiled inner loop for the edge add/remove Metropolis chain.

One call runs a block of proposals against flat numpy views of the chain
state (adjacency, pendant counts, susceptible counts, coupon windows) and
mutates them in place.  The Python layer owns everything else: rate
updates, annealing schedule, tracing, and periodic consistency checks.

The kernel uses numba's module-level RNG; seed it once per chain through
:func:`seed_kernel_rng`.  Chains are therefore sequential within a
process; run replications in separate processes if parallelism is needed.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def seed_kernel_rng(seed):  # pragma: no cover - trivial
    np.random.seed(seed)


@njit(cache=True)
def recount_feasible(adj, u, n_seeds):
    """Brute-force census: (positive-u count, both-positive edges, edge count)."""
    n = adj.shape[0]
    pos = 0
    for i in range(n):
        if u[i] > 0:
            pos += 1
    both = 0
    edges = 0
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j]:
                edges += 1
                if u[i] > 0 and u[j] > 0:
                    both += 1
    return pos, both, edges


@njit(cache=True)
def run_block(
    adj,          # uint8 (n, n), mutated
    recruit,      # uint8 (n, n), recruitment edges (never removable)
    is_seed,      # uint8 (n,)
    u,            # int64 (n,), mutated
    s,            # int64 (n,), mutated
    win_hi,       # int64 (n,), last event index with a coupon (== i if none)
    t,            # float64 (n,)
    t_star,       # float64 (n,)
    lam,          # float64, current recruitment rate
    inv_gamma,    # float64, 1/temperature (1.0 for plain posterior sampling)
    n_props,      # int64, proposals to attempt
    max_tries,    # int64, rejection-loop cap before enumerating feasible moves
    counts,       # int64 (4,): pos_u, both_pos_edges, n_edges, n_recruit_edges; mutated
    running,      # float64 (2,): sum log s over non-seeds, s.w; mutated
    lam_terms,    # float64, (n - #seeds) log lam + log prior(lam)
    track_best,   # uint8
    best_val,     # float64 (1,), best unnormalised log posterior; mutated
    best_adj,     # uint8 (n, n), mutated when track_best
    record,       # uint8
    mv_i, mv_j, mv_add, mv_acc,  # int32/int32/uint8/uint8 logs, length >= n_props
):
    """Attempt ``n_props`` add/remove moves; returns (accepted, best_updated)."""
    n = adj.shape[0]
    pos = counts[0]
    both = counts[1]
    n_edges = counts[2]
    n_rec = counts[3]
    add_c = pos * (pos - 1) // 2 - both
    rem_c = n_edges - n_rec
    sum_log_s = running[0]
    s_dot_w = running[1]
    accepted = 0
    best_updated = 0

    for p in range(n_props):
        if record:
            mv_i[p] = -1
            mv_j[p] = -1
            mv_add[p] = 0
            mv_acc[p] = 0
        if add_c + rem_c == 0:
            continue  # saturated and nothing removable: degenerate data

        # --- pick a vertex pair uniformly among feasible moves ---------------
        i = -1
        j = -1
        is_add = False
        found = False
        for _ in range(max_tries):
            a = np.random.randint(0, n)
            b = np.random.randint(0, n)
            if a == b:
                continue
            if a < b:
                ii, jj = a, b
            else:
                ii, jj = b, a
            if adj[ii, jj] == 0:
                if u[ii] >= 1 and u[jj] >= 1:
                    i, j, is_add, found = ii, jj, True, True
                    break
            elif recruit[ii, jj] == 0:
                i, j, is_add, found = ii, jj, False, True
                break
        if not found:
            # fall back to explicit enumeration of the feasible set
            pick = np.random.randint(0, add_c + rem_c)
            done = False
            for ii in range(n):
                if done:
                    break
                for jj in range(ii + 1, n):
                    if adj[ii, jj] == 0:
                        feasible = u[ii] >= 1 and u[jj] >= 1
                        this_add = True
                    else:
                        feasible = recruit[ii, jj] == 0
                        this_add = False
                    if feasible:
                        if pick == 0:
                            i, j, is_add = ii, jj, this_add
                            done = True
                            break
                        pick -= 1

        # --- likelihood ratio over the changed susceptible entries -----------
        hi_i = win_hi[i]
        hi_j = win_hi[j]
        kmax = hi_i if hi_i > hi_j else hi_j
        sgn = -1 if is_add else 1
        log_prod = 0.0
        for k in range(j + 1, kmax + 1):
            d_k = 0
            if k <= hi_i:
                d_k += 1
            if k <= hi_j:
                d_k += 1
            if d_k == 0:
                continue
            ns = s[k] + sgn * d_k
            if is_seed[k]:
                if ns < 0:
                    raise ValueError("susceptible count went negative; state corrupted")
            else:
                if ns < 1:
                    raise ValueError("susceptible count hit zero on a recruit; state corrupted")
                log_prod += np.log(float(ns)) - np.log(float(s[k]))
        dtime = (t_star[i] - min(t[j], t_star[i])) + (t_star[j] - t[j])
        if is_add:
            log_lik_ratio = log_prod + lam * dtime
        else:
            log_lik_ratio = log_prod - lam * dtime

        # --- proposal-count ratio --------------------------------------------
        ui = u[i]
        uj = u[j]
        d_pos = 0
        d_both = 0
        if is_add:
            if ui == 1:
                d_pos -= 1
                c = 0
                for y in range(n):
                    if adj[i, y] == 1 and u[y] > 0:
                        c += 1
                d_both -= c
            if uj == 1:
                d_pos -= 1
                c = 0
                for y in range(n):
                    if adj[j, y] == 1 and u[y] > 0:
                        c += 1
                d_both -= c
            if ui >= 2 and uj >= 2:
                d_both += 1
            new_edges = n_edges + 1
        else:
            if ui > 0 and uj > 0:
                d_both -= 1
            if ui == 0:
                d_pos += 1
                c = 0
                for y in range(n):
                    if y != j and adj[i, y] == 1 and u[y] > 0:
                        c += 1
                d_both += c
            if uj == 0:
                d_pos += 1
                c = 0
                for y in range(n):
                    if y != i and adj[j, y] == 1 and u[y] > 0:
                        c += 1
                d_both += c
            new_edges = n_edges - 1
        new_pos = pos + d_pos
        new_both = both + d_both
        new_add = new_pos * (new_pos - 1) // 2 - new_both
        new_rem = new_edges - n_rec
        total_new = new_add + new_rem
        if total_new <= 0:
            continue  # proposed state could not propose back; reject

        log_alpha = inv_gamma * log_lik_ratio + np.log(float(add_c + rem_c)) - np.log(
            float(total_new)
        )
        acc = log_alpha >= 0.0 or np.log(np.random.random()) < log_alpha

        if acc:
            accepted += 1
            for k in range(j + 1, hi_i + 1):
                s[k] += sgn
            for k in range(j + 1, hi_j + 1):
                s[k] += sgn
            if is_add:
                adj[i, j] = 1
                adj[j, i] = 1
                u[i] -= 1
                u[j] -= 1
                s_dot_w -= dtime
            else:
                adj[i, j] = 0
                adj[j, i] = 0
                u[i] += 1
                u[j] += 1
                s_dot_w += dtime
            sum_log_s += log_prod
            pos = new_pos
            both = new_both
            n_edges = new_edges
            add_c = new_add
            rem_c = new_rem
            if track_best:
                cur = lam_terms + sum_log_s - lam * s_dot_w
                if cur > best_val[0]:
                    best_val[0] = cur
                    for a2 in range(n):
                        for b2 in range(n):
                            best_adj[a2, b2] = adj[a2, b2]
                    best_updated = 1
        if record:
            mv_i[p] = i
            mv_j[p] = j
            mv_add[p] = 1 if is_add else 0
            mv_acc[p] = 1 if acc else 0

    counts[0] = pos
    counts[1] = both
    counts[2] = n_edges
    running[0] = sum_log_s
    running[1] = s_dot_w
    return accepted, best_updated
