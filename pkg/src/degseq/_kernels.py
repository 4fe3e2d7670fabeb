"""Compiled inner loops for Procedure A and the Procedure B replay.

These mirror :class:`degseq.sampler.SamplerState` step for step, including
the order in which uniforms are drawn, so a given uint32 seed produces the
same graph on either path. All mass arithmetic is int64; callers must check
:func:`degseq.sampler.fits_int64` first.
"""

import math

import numba
import numpy as np

# aggregate slots
DELTA1 = 0  # sum_u C(res_u, 2)
ADJ = 1  # sum over placed edges of res_u res_v
L1 = 2  # sum_u res_u d_u
Q = 3  # sum_u res_u^2 d_u^2
B = 4  # sum over placed edges of res_u res_v d_u d_v

_VALVE = 64

# divisors are checked positive before use, so skip Python's zero-division checks
_jit = numba.njit(cache=True, nogil=True, error_model="numpy")


@_jit
def _reset(deg, res, nnb, agg):
    res[:] = deg
    nnb[:] = 0
    agg[:] = 0
    for u in range(deg.shape[0]):
        d = deg[u]
        agg[DELTA1] += d * (d - 1) // 2
        agg[L1] += d * d
        agg[Q] += d * d * d * d


@_jit
def _mass8(agg, m, live, corr):
    """8m times the weighted suitable-pair mass."""
    pairs = live * (live - 1) // 2
    return (8 * m * (pairs - agg[DELTA1] - agg[ADJ])
            - corr * (agg[L1] * agg[L1] - agg[Q]) + corr * 2 * agg[B])


@_jit
def _adjacent(i, j, nbr, nnb):
    if nnb[j] < nnb[i]:
        i, j = j, i
    for t in range(nnb[i]):
        if nbr[i, t] == j:
            return True
    return False


@_jit
def _decrement(v, deg, res, nbr, nnb, agg):
    s = 0
    sb = 0
    for t in range(nnb[v]):
        u = nbr[v, t]
        s += res[u]
        sb += res[u] * deg[u]
    rv = res[v]
    dv = deg[v]
    agg[DELTA1] -= rv - 1
    agg[ADJ] -= s
    agg[L1] -= dv
    agg[Q] -= (2 * rv - 1) * dv * dv
    agg[B] -= dv * sb
    res[v] = rv - 1


@_jit
def _add_edge(i, j, deg, res, nbr, nnb, agg):
    _decrement(i, deg, res, nbr, nnb, agg)
    _decrement(j, deg, res, nbr, nnb, agg)
    nbr[i, nnb[i]] = j
    nnb[i] += 1
    nbr[j, nnb[j]] = i
    nnb[j] += 1
    agg[ADJ] += res[i] * res[j]
    agg[B] += res[i] * res[j] * deg[i] * deg[j]


@_jit
def _retire(v, res, offsets, stubs, where, live):
    s = offsets[v] + res[v] - 1
    pos = where[s]
    last = live - 1
    t = stubs[last]
    stubs[pos] = t
    where[t] = pos
    stubs[last] = s
    where[s] = last
    return live - 1


@_jit
def _enumerate_pick(deg, res, nbr, nnb, owner, stubs, live, mark, four_m, corr):
    """Exact weighted draw over all suitable pairs; returns (i, j, weight, total)."""
    verts = np.empty(live, dtype=np.int64)
    nv = 0
    for a in range(live):
        v = owner[stubs[a]]
        if mark[v] == 0:
            mark[v] = 1
            verts[nv] = v
            nv += 1
    verts = np.sort(verts[:nv])
    for a in range(nv):
        mark[verts[a]] = 0
    total = 0
    for a in range(nv):
        i = verts[a]
        for b in range(a + 1, nv):
            j = verts[b]
            if not _adjacent(i, j, nbr, nnb):
                total += res[i] * res[j] * (four_m - corr * deg[i] * deg[j])
    if total == 0:
        return -1, -1, 0, 0
    target = np.int64(np.random.random() * total)
    cum = 0
    for a in range(nv):
        i = verts[a]
        for b in range(a + 1, nv):
            j = verts[b]
            if not _adjacent(i, j, nbr, nnb):
                w = res[i] * res[j] * (four_m - corr * deg[i] * deg[j])
                cum += w
                if cum > target:
                    return i, j, w, total
    return -1, -1, 0, total


@_jit
def _run_a(deg, offsets, owner, m, dmax, corr, res, nbr, nnb, agg, stubs, where,
           mark, edges):
    """One run of Procedure A on freshly reset buffers.

    Returns (success, log_p, r, valve_hits); edges[:r] holds the insertion order.
    """
    _reset(deg, res, nnb, agg)
    for s in range(2 * m):
        stubs[s] = s
        where[s] = s
    four_m = 4 * m
    live = 2 * m
    threshold = 2 * dmax * dmax
    log_p = 0.0
    valve_hits = 0
    for r in range(m):
        mass = _mass8(agg, m, live, corr)
        if mass <= 0:
            return False, log_p, r, valve_hits
        i = -1
        j = -1
        w = 0
        if live > threshold:
            cap = _VALVE * ((four_m * live * live + mass - 1) // mass) + _VALVE
            found = False
            for _ in range(cap):
                i = owner[stubs[np.int64(np.random.random() * live)]]
                j = owner[stubs[np.int64(np.random.random() * live)]]
                if i == j:
                    continue
                wij = four_m - corr * deg[i] * deg[j]
                if corr != 0:
                    if np.int64(np.random.random() * four_m) >= wij:
                        continue
                if _adjacent(i, j, nbr, nnb):
                    continue
                w = res[i] * res[j] * wij
                found = True
                break
            if not found:
                i = -1
                valve_hits += 1
        if i < 0:
            i, j, w, total = _enumerate_pick(deg, res, nbr, nnb, owner, stubs, live,
                                             mark, four_m, corr)
            if i < 0:
                return False, log_p, r, valve_hits
        log_p += math.log(float(2 * w)) - math.log(float(mass))
        if i > j:
            i, j = j, i
        edges[r, 0] = i
        edges[r, 1] = j
        live = _retire(i, res, offsets, stubs, where, live)
        live = _retire(j, res, offsets, stubs, where, live)
        _add_edge(i, j, deg, res, nbr, nnb, agg)
    return True, log_p, m, valve_hits


@_jit
def procedure_a(deg, m, dmax, corr, seed):
    """Single run: (success, log_p, edges in insertion order, valve_hits)."""
    n = deg.shape[0]
    offsets = np.zeros(n, dtype=np.int64)
    owner = np.empty(2 * m, dtype=np.int64)
    acc = 0
    for v in range(n):
        offsets[v] = acc
        for t in range(deg[v]):
            owner[acc + t] = v
        acc += deg[v]
    res = np.empty(n, dtype=np.int64)
    nbr = np.empty((n, max(dmax, 1)), dtype=np.int64)
    nnb = np.empty(n, dtype=np.int64)
    agg = np.empty(5, dtype=np.int64)
    stubs = np.empty(2 * m, dtype=np.int64)
    where = np.empty(2 * m, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    edges = np.empty((m, 2), dtype=np.int64)
    np.random.seed(seed)
    ok, log_p, r, valve = _run_a(deg, offsets, owner, m, dmax, corr, res, nbr, nnb,
                                 agg, stubs, where, mark, edges)
    return ok, log_p, edges[:r].copy(), valve


@_jit
def procedure_a_batch(deg, m, dmax, corr, seed, k):
    """k consecutive runs sharing one seeded stream; returns (success, log_p)."""
    n = deg.shape[0]
    offsets = np.zeros(n, dtype=np.int64)
    owner = np.empty(2 * m, dtype=np.int64)
    acc = 0
    for v in range(n):
        offsets[v] = acc
        for t in range(deg[v]):
            owner[acc + t] = v
        acc += deg[v]
    res = np.empty(n, dtype=np.int64)
    nbr = np.empty((n, max(dmax, 1)), dtype=np.int64)
    nnb = np.empty(n, dtype=np.int64)
    agg = np.empty(5, dtype=np.int64)
    stubs = np.empty(2 * m, dtype=np.int64)
    where = np.empty(2 * m, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    edges = np.empty((m, 2), dtype=np.int64)
    success = np.zeros(k, dtype=np.bool_)
    log_ps = np.zeros(k)
    np.random.seed(seed)
    for t in range(k):
        ok, log_p, r, valve = _run_a(deg, offsets, owner, m, dmax, corr, res, nbr,
                                     nnb, agg, stubs, where, mark, edges)
        success[t] = ok
        log_ps[t] = log_p
    return success, log_ps


# swap indices packed into one uniform; bounds the per-outcome bias by 2**-27
PACK_LIMIT = 1 << 26


@_jit
def _shuffle(order, m):
    """Fisher-Yates on order[:m] (reset to identity), several swaps per uniform.

    Swaps for a = hi, hi-1, ..., lo share x = floor(u * prod(a + 1)), decoded
    in mixed radix starting with a = hi.
    """
    for a in range(m):
        order[a] = a
    hi = m - 1
    while hi > 0:
        span = hi + 1
        lo = hi - 1
        while lo > 0 and span * (lo + 1) <= PACK_LIMIT:
            span *= lo + 1
            lo -= 1
        x = np.int64(np.random.random() * span)
        for a in range(hi, lo, -1):
            b = x % (a + 1)
            x //= a + 1
            tmp = order[a]
            order[a] = order[b]
            order[b] = tmp
        hi = lo


@_jit
def _replay_trials(deg, m, corr, eu, ev, ewt, agg0, res, nbr, width, nnb, order, out,
                   start, stop):
    """Fill out[start:stop] with log P of orderings shuffled from the current stream.

    Same arithmetic as _mass8/_add_edge with the aggregates held in locals.
    """
    n = deg.shape[0]
    for t in range(start, stop):
        for v in range(n):
            res[v] = deg[v]
            nnb[v] = 0
        delta1 = agg0[DELTA1]
        adj = 0
        l1 = agg0[L1]
        q = agg0[Q]
        bsum = 0
        _shuffle(order, m)
        live = 2 * m
        log_p = 0.0
        # running product of step probabilities, folded into log_p before underflow
        prod = 1.0
        for r in range(m):
            e = order[r]
            i = eu[e]
            j = ev[e]
            mass = (8 * m * (live * (live - 1) // 2 - delta1 - adj)
                    - corr * (l1 * l1 - q) + corr * 2 * bsum)
            prod *= float(2 * res[i] * res[j] * ewt[e]) / float(mass)
            if prod < 1e-250:
                log_p += math.log(prod)
                prod = 1.0
            for v in (i, j):
                s = 0
                sb = 0
                for x in range(nnb[v]):
                    u = nbr[v * width + x]
                    s += res[u]
                    sb += res[u] * deg[u]
                rv = res[v]
                dv = deg[v]
                delta1 -= rv - 1
                adj -= s
                l1 -= dv
                q -= (2 * rv - 1) * dv * dv
                bsum -= dv * sb
                res[v] = rv - 1
            nbr[i * width + nnb[i]] = j
            nnb[i] += 1
            nbr[j * width + nnb[j]] = i
            nnb[j] += 1
            adj += res[i] * res[j]
            bsum += res[i] * res[j] * deg[i] * deg[j]
            live -= 2
        out[t] = log_p + math.log(prod)


# below this many edges the replays read step ratios from a table over edge subsets
TABLE_MAX_M = 10
# with m! orderings at most this many, every ordering is priced once up front
LOOKUP_MAX_ORDERINGS = 5040


@_jit
def _ratio_table(deg, m, corr, eu, ev, ewt, cnt):
    """Step ratio for edge e after the edges in bitmask S are placed, at [S * m + e].

    The probability of a step depends only on the set already placed, so 2^m
    states cover every ordering. Entries with e in S are unused.
    """
    nstate = 1 << m
    table = np.zeros(nstate * m)
    for st in range(nstate - 1):
        placed = 0
        for e in range(m):
            if st >> e & 1:
                cnt[eu[e]] += 1
                cnt[ev[e]] += 1
                placed += 1
        # vertices off the edge list have degree 0 and contribute nothing
        delta1 = 0
        l1 = 0
        q = 0
        for e in range(m):
            for v in (eu[e], ev[e]):
                if cnt[v] >= 0:
                    rv = deg[v] - cnt[v]
                    delta1 += rv * (rv - 1) // 2
                    l1 += rv * deg[v]
                    q += rv * rv * deg[v] * deg[v]
                    cnt[v] = -1 - cnt[v]
        for e in range(m):
            for v in (eu[e], ev[e]):
                if cnt[v] < 0:
                    cnt[v] = -1 - cnt[v]
        adj = 0
        bsum = 0
        for e in range(m):
            if st >> e & 1:
                i = eu[e]
                j = ev[e]
                x = (deg[i] - cnt[i]) * (deg[j] - cnt[j])
                adj += x
                bsum += x * deg[i] * deg[j]
        live = 2 * (m - placed)
        mass = (8 * m * (live * (live - 1) // 2 - delta1 - adj)
                - corr * (l1 * l1 - q) + corr * 2 * bsum)
        for e in range(m):
            if not st >> e & 1:
                i = eu[e]
                j = ev[e]
                table[st * m + e] = (float(2 * (deg[i] - cnt[i]) * (deg[j] - cnt[j]) * ewt[e])
                                     / float(mass))
        for e in range(m):
            if st >> e & 1:
                cnt[eu[e]] -= 1
                cnt[ev[e]] -= 1
    return table


@_jit
def _replay_table(table, m, order, out, start, stop):
    """Table-driven twin of _replay_trials; same draws, same floating-point result."""
    for t in range(start, stop):
        _shuffle(order, m)
        st = 0
        log_p = 0.0
        prod = 1.0
        for r in range(m):
            e = order[r]
            prod *= table[st * m + e]
            if prod < 1e-250:
                log_p += math.log(prod)
                prod = 1.0
            st |= 1 << e
        out[t] = log_p + math.log(prod)


@_jit
def np_seed(seed):
    """Seed the compiled-code generator (separate from numpy's global state)."""
    np.random.seed(seed)


@_jit
def _ordering_values(table, m):
    """log P for every packed shuffle outcome x in [0, m!), as _replay_table computes it."""
    span = 1
    for a in range(2, m + 1):
        span *= a
    vals = np.empty(span)
    order = np.empty(m, dtype=np.int64)
    for x0 in range(span):
        for a in range(m):
            order[a] = a
        x = x0
        for a in range(m - 1, 0, -1):
            b = x % (a + 1)
            x //= a + 1
            tmp = order[a]
            order[a] = order[b]
            order[b] = tmp
        st = 0
        log_p = 0.0
        prod = 1.0
        for r in range(m):
            e = order[r]
            prod *= table[st * m + e]
            if prod < 1e-250:
                log_p += math.log(prod)
                prod = 1.0
            st |= 1 << e
        vals[x0] = log_p + math.log(prod)
    return vals


@_jit
def _replay_lookup(values, out, start, stop):
    """Replays when one uniform fixes the whole ordering (m! <= PACK_LIMIT)."""
    span = values.shape[0]
    for t in range(start, stop):
        out[t] = values[np.int64(np.random.random() * span)]


@_jit
def _replay_small(table, values, m, order, out, start, stop):
    if values.shape[0] > 0:
        _replay_lookup(values, out, start, stop)
    else:
        _replay_table(table, m, order, out, start, stop)


@_jit
def _small_m_tables(deg, m, corr, eu, ev, ewt, cnt):
    table = _ratio_table(deg, m, corr, eu, ev, ewt, cnt)
    span = 1
    for a in range(2, m + 1):
        span *= a
    if span <= LOOKUP_MAX_ORDERINGS:
        return table, _ordering_values(table, m)
    return table, np.empty(0)


@_jit
def _edge_weights(deg, m, corr, eu, ev):
    ewt = np.empty(m, dtype=np.int64)
    for e in range(m):
        ewt[e] = 4 * m - corr * deg[eu[e]] * deg[ev[e]]
    return ewt


@_jit
def procedure_b_batch(deg, m, dmax, corr, eu, ev, seeds, chunk):
    """log P of uniformly shuffled orderings of the edge list (eu, ev).

    Runs ``chunk`` orderings per entry of ``seeds``, re-seeding at each chunk start.
    """
    n = deg.shape[0]
    width = max(dmax, 1)
    res = np.empty(n, dtype=np.int64)
    nbr = np.empty(n * width, dtype=np.int64)
    nnb = np.empty(n, dtype=np.int64)
    agg0 = np.empty(5, dtype=np.int64)
    _reset(deg, res, nnb, agg0)
    ewt = _edge_weights(deg, m, corr, eu, ev)
    order = np.arange(m)
    out = np.zeros(seeds.shape[0] * chunk)
    use_table = m <= TABLE_MAX_M
    if use_table:
        table, values = _small_m_tables(deg, m, corr, eu, ev, ewt, np.zeros(n, dtype=np.int64))
    for c in range(seeds.shape[0]):
        np.random.seed(seeds[c])
        if use_table:
            _replay_small(table, values, m, order, out, c * chunk, (c + 1) * chunk)
        else:
            _replay_trials(deg, m, corr, eu, ev, ewt, agg0, res, nbr, width, nnb, order,
                           out, c * chunk, (c + 1) * chunk)
    return out


@_jit
def log_mean_relvar(vals, k):
    """(log mean, Var/mean^2) of exp(vals[:k]), summed in index order."""
    top = -np.inf
    for t in range(k):
        if vals[t] > top:
            top = vals[t]
    if top == -np.inf:
        return -np.inf, np.nan
    y = np.empty(k)
    s1 = 0.0
    for t in range(k):
        y[t] = math.exp(vals[t] - top)
        s1 += y[t]
    y_bar = s1 / k
    s2 = 0.0
    for t in range(k):
        dy = y[t] - y_bar
        s2 += dy * dy
    return top + math.log(y_bar), s2 / k / (y_bar * y_bar)


@_jit
def generate_batch(deg, m, dmax, corr, seeds, log_x, log_m_fact, pilot, z2_eps2,
                   max_attempts):
    """Rejection sampler over Procedure A, one stream per sample.

    Each attempt draws from the sample's stream in this order: one Procedure A
    run, the pilot replays, the top-up replays, then the acceptance uniform.
    Returns (edges[s, r], log_p, attempts, a_failures, overflow); attempts[s]
    is -1 when sample s hit max_attempts.
    """
    n = deg.shape[0]
    ns = seeds.shape[0]
    offsets = np.zeros(n, dtype=np.int64)
    owner = np.empty(2 * m, dtype=np.int64)
    acc = 0
    for v in range(n):
        offsets[v] = acc
        for t in range(deg[v]):
            owner[acc + t] = v
        acc += deg[v]
    width = max(dmax, 1)
    res = np.empty(n, dtype=np.int64)
    nbr = np.empty((n, width), dtype=np.int64)
    nbr_flat = np.empty(n * width, dtype=np.int64)
    nnb = np.empty(n, dtype=np.int64)
    agg = np.empty(5, dtype=np.int64)
    agg0 = np.empty(5, dtype=np.int64)
    _reset(deg, res, nnb, agg0)
    stubs = np.empty(2 * m, dtype=np.int64)
    where = np.empty(2 * m, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    edges = np.empty((m, 2), dtype=np.int64)
    eu = np.empty(m, dtype=np.int64)
    ev = np.empty(m, dtype=np.int64)
    order = np.arange(m)
    vals = np.empty(pilot, dtype=np.float64)
    out_edges = np.zeros((ns, m, 2), dtype=np.int64)
    out_log_p = np.zeros(ns)
    attempts = np.zeros(ns, dtype=np.int64)
    failures = np.zeros(ns, dtype=np.int64)
    overflow = np.zeros(ns, dtype=np.int64)
    log5 = math.log(5.0)
    use_table = m <= TABLE_MAX_M
    cnt = np.zeros(n, dtype=np.int64)
    for s in range(ns):
        np.random.seed(seeds[s])
        accepted = False
        while attempts[s] < max_attempts:
            attempts[s] += 1
            ok, log_p, r, valve = _run_a(deg, offsets, owner, m, dmax, corr, res, nbr,
                                         nnb, agg, stubs, where, mark, edges)
            if not ok:
                failures[s] += 1
                continue
            for e in range(m):
                eu[e] = edges[e, 0]
                ev[e] = edges[e, 1]
            ewt = _edge_weights(deg, m, corr, eu, ev)
            if use_table:
                table, values = _small_m_tables(deg, m, corr, eu, ev, ewt, cnt)
                _replay_small(table, values, m, order, vals, 0, pilot)
            else:
                _replay_trials(deg, m, corr, eu, ev, ewt, agg0, res, nbr_flat, width, nnb,
                               order, vals, 0, pilot)
            _, relvar = log_mean_relvar(vals, pilot)
            k = pilot + np.int64(math.ceil(z2_eps2 * relvar))
            if k > vals.shape[0]:
                grown = np.empty(k, dtype=np.float64)
                grown[:pilot] = vals[:pilot]
                vals = grown
            if use_table:
                _replay_small(table, values, m, order, vals, pilot, k)
            else:
                _replay_trials(deg, m, corr, eu, ev, ewt, agg0, res, nbr_flat, width, nnb,
                               order, vals, pilot, k)
            log_mean, _ = log_mean_relvar(vals, k)
            log_accept = -log5 - log_x - (log_m_fact + log_mean)
            u = np.random.random()
            if log_accept >= 0.0:
                overflow[s] += 1
                accepted = True
            elif math.log(u) < log_accept:
                accepted = True
            if accepted:
                out_edges[s] = edges
                out_log_p[s] = log_p
                break
        if not accepted:
            attempts[s] = -1
    return out_edges, out_log_p, attempts, failures, overflow
