"""Compiled inner loops shared by the simulator and the genotype-tree sampler.

Birth-rate laws reach these kernels in a flat form: a list of components,
each either an atom at ``lo`` or a segment ``[lo, hi]`` whose density is
linear from ``d0`` to ``d1`` (unnormalized). ``cum`` holds the cumulative
component weights and ends at 1.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

ATOM = 0
SEGMENT = 1

# run_process status codes
EXTINCT = 0
POP_CAP = 1
TIME_CAP = 2
EVENT_CAP = 3


@nb.njit(cache=True, nogil=True)
def segment_quantile(u, lo, hi, d0, d1):
    w = hi - lo
    if d0 == d1:
        return lo + w * u
    c = u * (d0 + d1) * 0.5
    if c <= 0.0:
        return lo
    t = 2.0 * c / (d0 + math.sqrt(d0 * d0 + 2.0 * (d1 - d0) * c))
    if t > 1.0:
        t = 1.0
    return lo + w * t


@nb.njit(cache=True, nogil=True)
def draw_rate(gen, kinds, cum, lo, hi, d0, d1):
    n = kinds.shape[0]
    k = 0
    if n > 1:
        u = gen.random()
        while k < n - 1 and cum[k] <= u:
            k += 1
    if kinds[k] == ATOM:
        return lo[k]
    return segment_quantile(gen.random(), lo[k], hi[k], d0[k], d1[k])


@nb.njit(cache=True, nogil=True)
def draw_rates(gen, kinds, cum, lo, hi, d0, d1, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
    return out


# ---------------------------------------------------------------- Fenwick tree


@nb.njit(cache=True, nogil=True)
def _fw_add(tree, n, i, delta):
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@nb.njit(cache=True, nogil=True)
def _fw_build(tree, weights, n):
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(1, n + 1):
        tree[i] += weights[i]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@nb.njit(cache=True, nogil=True)
def _fw_find(tree, n, x):
    """Smallest 1-based index whose prefix sum exceeds ``x``."""
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= x:
            x -= tree[nxt]
            pos = nxt
        step //= 2
    return pos + 1


@nb.njit(cache=True, nogil=True)
def _grow(a, size):
    out = np.zeros(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


# ------------------------------------------------------------ evolution process


@nb.njit(cache=True, nogil=True)
def run_process(gen, kinds, cum, lo, hi, d0, d1, r, t_max, pop_max, event_max,
                sample_times, resync_every):
    """One exact realization of the evolution process.

    Genotype ``g`` (labels start at 1) carries weight ``count[g] * (rate[g] + 1)``
    in a Fenwick tree; an event picks a genotype by weight, then birth with
    probability ``rate / (rate + 1)``.
    """
    cap = 64
    rates = np.zeros(cap + 1)
    counts = np.zeros(cap + 1, dtype=np.int64)
    weights = np.zeros(cap + 1)
    parents = np.zeros(cap + 1, dtype=np.int64)
    born = np.zeros(cap + 1)
    tree = np.zeros(cap + 1)

    ns = sample_times.shape[0]
    tz = np.zeros(ns, dtype=np.int64)
    tx = np.zeros(ns, dtype=np.int64)
    tg = np.zeros(ns, dtype=np.int64)
    taken = 0

    lam0 = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
    n_gen = 1
    alive_gen = 1
    rates[1] = lam0
    counts[1] = 1
    weights[1] = lam0 + 1.0
    _fw_add(tree, cap, 1, weights[1])
    total = weights[1]
    z = 1
    t = 0.0
    events = 0
    founder_ext = -1.0
    drift = 0.0
    since_sync = 0
    status = -1

    if z >= pop_max:
        status = POP_CAP
    while status < 0:
        if events >= event_max:
            status = EVENT_CAP
            break
        t_new = t - math.log(1.0 - gen.random()) / total
        while taken < ns and sample_times[taken] < t_new and sample_times[taken] <= t_max:
            tz[taken] = z
            tx[taken] = counts[1]
            tg[taken] = alive_gen
            taken += 1
        if t_new >= t_max:
            t = t_max
            status = TIME_CAP
            break
        t = t_new

        g = _fw_find(tree, cap, gen.random() * total)
        if g > n_gen or counts[g] == 0:
            # rounding pushed the draw past the live mass: resync and redraw
            s = 0.0
            for i in range(1, n_gen + 1):
                weights[i] = counts[i] * (rates[i] + 1.0)
                s += weights[i]
            _fw_build(tree, weights, cap)
            total = s
            continue
        events += 1
        lam = rates[g]
        if gen.random() * (lam + 1.0) < lam:
            z += 1
            if r > 0.0 and gen.random() < r:
                lam_new = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
                n_gen += 1
                alive_gen += 1
                if n_gen > cap:
                    new_cap = cap * 2
                    rates = _grow(rates, new_cap + 1)
                    counts = _grow(counts, new_cap + 1)
                    weights = _grow(weights, new_cap + 1)
                    parents = _grow(parents, new_cap + 1)
                    born = _grow(born, new_cap + 1)
                    tree = np.zeros(new_cap + 1)
                    cap = new_cap
                    _fw_build(tree, weights, cap)
                rates[n_gen] = lam_new
                counts[n_gen] = 1
                parents[n_gen] = g
                born[n_gen] = t
                weights[n_gen] = lam_new + 1.0
                _fw_add(tree, cap, n_gen, lam_new + 1.0)
                total += lam_new + 1.0
            else:
                counts[g] += 1
                weights[g] += lam + 1.0
                _fw_add(tree, cap, g, lam + 1.0)
                total += lam + 1.0
            if z >= pop_max:
                status = POP_CAP
                break
        else:
            z -= 1
            counts[g] -= 1
            if counts[g] == 0:
                _fw_add(tree, cap, g, -weights[g])
                total -= weights[g]
                weights[g] = 0.0
                alive_gen -= 1
                if g == 1:
                    founder_ext = t
            else:
                weights[g] -= lam + 1.0
                _fw_add(tree, cap, g, -(lam + 1.0))
                total -= lam + 1.0
            if z == 0:
                status = EXTINCT
                break

        since_sync += 1
        if since_sync >= resync_every and since_sync >= n_gen:
            s = 0.0
            for i in range(1, n_gen + 1):
                weights[i] = counts[i] * (rates[i] + 1.0)
                s += weights[i]
            rel = abs(total - s) / s
            if rel > drift:
                drift = rel
            _fw_build(tree, weights, cap)
            total = s
            since_sync = 0

    if status == EXTINCT:
        while taken < ns and sample_times[taken] <= t_max:
            tz[taken] = 0
            tx[taken] = 0
            tg[taken] = 0
            taken += 1
    elif status == TIME_CAP:
        while taken < ns and sample_times[taken] <= t_max:
            tz[taken] = z
            tx[taken] = counts[1]
            tg[taken] = alive_gen
            taken += 1

    return (status, t, z, events, founder_ext, drift,
            rates[1:n_gen + 1].copy(), parents[1:n_gen + 1].copy(),
            born[1:n_gen + 1].copy(), taken, tz, tx, tg)


@nb.njit(cache=True, nogil=True)
def run_summary(gen, kinds, cum, lo, hi, d0, d1, r, t_max, pop_max, event_max):
    """``run_process`` stripped to the fields a batch row needs."""
    res = run_process(gen, kinds, cum, lo, hi, d0, d1, r, t_max, pop_max, event_max,
                      np.empty(0), 4096)
    return res[0], res[1], res[2], res[6].shape[0], res[3]


# --------------------------------------------------------------- genotype tree


@nb.njit(cache=True, nogil=True)
def lineage_mutants(gen, lam, r, cap):
    """Mutant births of one genotype lineage over its whole life; -1 past ``cap``."""
    if lam <= 0.0 or r <= 0.0:
        return 0
    p_same = lam * (1.0 - r) / (lam + 1.0)
    p_any = lam / (lam + 1.0)
    n = 1
    y = 0
    while n > 0:
        u = gen.random()
        if u < p_same:
            n += 1
        elif u < p_any:
            y += 1
            if y > cap:
                return -1
        else:
            n -= 1
    return y


@nb.njit(cache=True, nogil=True)
def lineage_batch(gen, lam, r, cap, size):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = lineage_mutants(gen, lam, r, cap)
    return out


@nb.njit(cache=True, nogil=True)
def mixed_lineage_batch(gen, kinds, cum, lo, hi, d0, d1, r, cap, size):
    """Root rate drawn from the law, then its lineage's mutant count."""
    lams = np.empty(size)
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        lams[i] = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
        out[i] = lineage_mutants(gen, lams[i], r, cap)
    return lams, out


@nb.njit(cache=True, nogil=True)
def grow_tree(gen, kinds, cum, lo, hi, d0, d1, r, node_cap, lineage_cap):
    """Breadth-first genotype tree; stops at extinction or ``node_cap`` nodes."""
    size = 256
    lams = np.zeros(size)
    parents = np.zeros(size, dtype=np.int64)
    offspring = np.full(size, -1, dtype=np.int64)
    lams[0] = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
    nodes = 1
    head = 0
    truncated = False
    while head < nodes:
        y = lineage_mutants(gen, lams[head], r, lineage_cap)
        if y < 0:
            truncated = True
            break
        offspring[head] = y
        if nodes + y > node_cap:
            truncated = True
            break
        if nodes + y > size:
            while nodes + y > size:
                size *= 2
            lams = _grow(lams, size)
            parents = _grow(parents, size)
            grown = np.full(size, -1, dtype=np.int64)
            grown[: offspring.shape[0]] = offspring
            offspring = grown
        for _ in range(y):
            lams[nodes] = draw_rate(gen, kinds, cum, lo, hi, d0, d1)
            parents[nodes] = head + 1
            nodes += 1
        head += 1
    return lams[:nodes].copy(), parents[:nodes].copy(), offspring[:nodes].copy(), truncated
