"""Procedure A: sequential weighted edge insertion.

A suitable pair (i, j) is added with probability proportional to
``res_i * res_j * (4m - d_i d_j)``, where ``res`` are the residual degrees.
The normalizer is maintained exactly through five integer aggregates::

    8m W = 8m [C(L, 2) - delta1 - adj] - (l1**2 - q) + 2 b

with L the number of unmatched stubs. :class:`SamplerState` is the exact
reference implementation with a step-level API; :func:`sample` runs the
compiled kernel in :mod:`degseq._kernels` whenever int64 arithmetic cannot
overflow, and falls back to :class:`SamplerState` otherwise. Both consume
uniforms in the same order, so they agree draw for draw.
"""

from dataclasses import dataclass, field
import enum
from fractions import Fraction
import math

import numpy as np

from . import _kernels
from .degrees import regime_check
from .logspace import NEG_INF, log_factorial

VALVE = _kernels._VALVE


class FailureDetected(Exception):
    """No suitable pair is left: the run ends in Procedure A's failure event."""


class Phase(enum.Enum):
    REJECTION = "rejection"
    EXACT_ENUMERATION = "exact-enumeration"


def uses_degree_correction(seq):
    """Whether the ``1 - d_i d_j / 4m`` factor is positive for every vertex pair.

    Outside that range the factor would zero out or flip the sign of some
    pair weights, so the sampler drops it and proposes pairs with weight
    ``res_i res_j``. Any strictly positive proposal keeps N unbiased.
    """
    top = sorted(seq.degrees, reverse=True)[:2]
    if len(top) < 2:
        return True
    return top[0] * top[1] < 4 * seq.m


def fits_int64(seq):
    m, dmax = seq.m, seq.d_max
    return 16 * m ** 3 + 8 * m * m * dmax * dmax < 2 ** 62


def stream_seed(seed, *key):
    """uint32 seed for the numpy/numba Mersenne Twister, derived from a 64-bit seed.

    ``key`` selects an independent sub-stream (``SeedSequence`` spawn key).
    """
    ss = np.random.SeedSequence(int(seed) % 2 ** 64, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1)[0])


def chunk_seeds(seed, tag, chunks):
    """uint32 seeds for the given chunk indices of sub-stream ``tag``.

    Chunk c always gets word c of one SeedSequence, whatever else is requested.
    """
    chunks = np.asarray(chunks, dtype=np.int64)
    if chunks.size == 0:
        return np.empty(0, dtype=np.uint32)
    ss = np.random.SeedSequence(int(seed) % 2 ** 64, spawn_key=(int(tag),))
    return ss.generate_state(int(chunks.max()) + 1)[chunks]


class SamplerState:
    """Mutable state of one Procedure A run, with exact integer aggregates."""

    def __init__(self, seq):
        self.seq = seq
        self.deg = list(seq.degrees)
        self.m = seq.m
        self.four_m = 4 * self.m
        self.d_max = seq.d_max
        self.corr = 1 if uses_degree_correction(seq) else 0
        self.threshold = 2 * self.d_max * self.d_max
        self.residual = list(self.deg)
        self.neighbors = [set() for _ in self.deg]
        self.edges = []
        self.offsets = []
        self.owner = []
        acc = 0
        for v, d in enumerate(self.deg):
            self.offsets.append(acc)
            self.owner.extend([v] * d)
            acc += d
        self.stubs = list(range(2 * self.m))
        self.where = list(range(2 * self.m))
        self.live = 2 * self.m
        self.delta1 = sum(d * (d - 1) // 2 for d in self.deg)
        self.adj = 0
        self.l1 = sum(d * d for d in self.deg)
        self.q = sum(d ** 4 for d in self.deg)
        self.b = 0
        self.r = 0
        self.log_p = 0.0
        self.valve_hits = 0

    @property
    def phase(self):
        if self.live > self.threshold:
            return Phase.REJECTION
        return Phase.EXACT_ENUMERATION

    @property
    def done(self):
        return self.r == self.m

    def mass8(self):
        """8m times the weighted suitable-pair mass W_r."""
        pairs = self.live * (self.live - 1) // 2
        return (8 * self.m * (pairs - self.delta1 - self.adj)
                - self.corr * (self.l1 * self.l1 - self.q) + 2 * self.corr * self.b)

    def pair_weight(self, i, j):
        res = self.residual
        return res[i] * res[j] * (self.four_m - self.corr * self.deg[i] * self.deg[j])

    def is_suitable(self, i, j):
        return (i != j and self.residual[i] > 0 and self.residual[j] > 0
                and j not in self.neighbors[i])

    def pair_probability(self, i, j):
        """Exact probability that the next step adds (i, j)."""
        if not self.is_suitable(i, j):
            return Fraction(0)
        return Fraction(2 * self.pair_weight(i, j), self.mass8())

    def suitable_pairs(self):
        verts = sorted({self.owner[s] for s in self.stubs[:self.live]})
        for a, i in enumerate(verts):
            for j in verts[a + 1:]:
                if j not in self.neighbors[i]:
                    yield i, j

    def _enumerate_pick(self, rng):
        pairs = [(i, j, self.pair_weight(i, j)) for i, j in self.suitable_pairs()]
        total = sum(w for _, _, w in pairs)
        if total == 0:
            raise FailureDetected(f"no suitable pair at step {self.r}")
        target = int(rng.random_sample() * total)
        cum = 0
        for i, j, w in pairs:
            cum += w
            if cum > target:
                return i, j, w
        raise FailureDetected("cumulative draw ran off the end")  # unreachable

    def _rejection_pick(self, rng, mass):
        live, four_m = self.live, self.four_m
        cap = VALVE * ((four_m * live * live + mass - 1) // mass) + VALVE
        owner, stubs, deg = self.owner, self.stubs, self.deg
        for _ in range(cap):
            i = owner[stubs[int(rng.random_sample() * live)]]
            j = owner[stubs[int(rng.random_sample() * live)]]
            if i == j:
                continue
            wij = four_m - self.corr * deg[i] * deg[j]
            if self.corr and int(rng.random_sample() * four_m) >= wij:
                continue
            if j in self.neighbors[i]:
                continue
            return i, j, self.residual[i] * self.residual[j] * wij
        self.valve_hits += 1
        return None

    def select_pair(self, rng):
        """Draw the next pair; returns ``(i, j, log_p)`` with ``i < j``.

        ``rng`` is a ``numpy.random.RandomState``; only ``random_sample`` is used.
        """
        if self.r >= self.m:
            raise ValueError("all edges already placed")
        mass = self.mass8()
        if mass <= 0:
            raise FailureDetected(f"no suitable pair at step {self.r}")
        picked = None
        if self.phase is Phase.REJECTION:
            picked = self._rejection_pick(rng, mass)
        if picked is None:
            picked = self._enumerate_pick(rng)
        i, j, w = picked
        log_p = math.log(float(2 * w)) - math.log(float(mass))
        return min(i, j), max(i, j), log_p

    def _retire(self, v):
        s = self.offsets[v] + self.residual[v] - 1
        pos = self.where[s]
        last = self.live - 1
        t = self.stubs[last]
        self.stubs[pos] = t
        self.where[t] = pos
        self.stubs[last] = s
        self.where[s] = last
        self.live = last

    def _decrement(self, v):
        res, deg = self.residual, self.deg
        s = sum(res[u] for u in self.neighbors[v])
        sb = sum(res[u] * deg[u] for u in self.neighbors[v])
        rv, dv = res[v], deg[v]
        self.delta1 -= rv - 1
        self.adj -= s
        self.l1 -= dv
        self.q -= (2 * rv - 1) * dv * dv
        self.b -= dv * sb
        res[v] = rv - 1

    def apply_edge(self, i, j, log_p=0.0):
        """Place edge (i, j). Touches only i, j and their current neighbours."""
        if not self.is_suitable(i, j):
            raise ValueError(f"({i}, {j}) is not a suitable pair")
        self._retire(i)
        self._retire(j)
        self._decrement(i)
        self._decrement(j)
        self.neighbors[i].add(j)
        self.neighbors[j].add(i)
        ri, rj = self.residual[i], self.residual[j]
        self.adj += ri * rj
        self.b += ri * rj * self.deg[i] * self.deg[j]
        self.edges.append((min(i, j), max(i, j)))
        self.log_p += log_p
        self.r += 1

    def step(self, rng):
        i, j, log_p = self.select_pair(rng)
        self.apply_edge(i, j, log_p)
        return i, j, log_p

    def aggregates(self):
        return {"delta1": self.delta1, "adj": self.adj, "l1": self.l1, "q": self.q, "b": self.b}

    def recompute(self):
        """Aggregates from their definitions, ignoring the incremental values."""
        res, deg = self.residual, self.deg
        return {
            "delta1": sum(x * (x - 1) // 2 for x in res),
            "adj": sum(res[u] * res[v] for u, v in self.edges),
            "l1": sum(x * d for x, d in zip(res, deg)),
            "q": sum(x * x * d * d for x, d in zip(res, deg)),
            "b": sum(res[u] * res[v] * deg[u] * deg[v] for u, v in self.edges),
        }

    def mass8_from_scratch(self):
        """8m W by direct summation over suitable vertex pairs."""
        total = 0
        n = len(self.deg)
        for i in range(n):
            if self.residual[i] == 0:
                continue
            for j in range(i + 1, n):
                if self.is_suitable(i, j):
                    total += 2 * self.pair_weight(i, j)
        return total

    def check_bounds(self):
        """Upper bounds on the unsuitable mass; raise AssertionError on violation."""
        remaining = 2 * self.m - 2 * self.r
        dm = self.d_max
        if 2 * (self.delta1 + self.adj) > remaining * dm * dm:
            raise AssertionError(f"delta_r bound violated at step {self.r}")
        if self.l1 > dm * remaining:
            raise AssertionError(f"lambda_r1 bound violated at step {self.r}")


@dataclass(frozen=True)
class GraphSample:
    n: int
    m: int
    edges: tuple  # canonical: (u, v) with u < v, sorted
    success: bool
    log_p: float
    log_n: float  # -inf on failure (N = 0)
    order: tuple = field(default=(), compare=False)  # insertion order, for replay
    seed: object = None
    regime_flag: bool = True
    valve_hits: int = 0

    @property
    def key(self):
        return self.edges

    def metadata(self):
        return {
            "n": self.n,
            "m": self.m,
            "success": self.success,
            "log_P": self.log_p,
            "log_N": self.log_n if self.success else None,
            "seed": self.seed,
            "regime_flag": self.regime_flag,
        }

    def edgelist_text(self):
        return "".join(f"{u} {v}\n" for u, v in self.edges)


def _make_sample(seq, success, log_p, order, seed, valve_hits):
    order = tuple((int(u), int(v)) for u, v in order)
    log_n = -log_factorial(seq.m) - log_p if success else NEG_INF
    return GraphSample(
        n=seq.n,
        m=seq.m,
        edges=tuple(sorted(order)),
        success=bool(success),
        log_p=float(log_p),
        log_n=float(log_n),
        order=order,
        seed=seed,
        regime_flag=regime_check(seq).in_regime,
        valve_hits=int(valve_hits),
    )


def run_reference(seq, stream):
    """Procedure A on :class:`SamplerState`, seeded with a uint32 stream seed."""
    return run_reference_rng(seq, np.random.RandomState(stream))


def run_reference_rng(seq, rng):
    state = SamplerState(seq)
    success = True
    while not state.done:
        try:
            state.step(rng)
        except FailureDetected:
            success = False
            break
    return success, state.log_p, state.edges, state.valve_hits


def degree_array(seq):
    return np.asarray(seq.degrees, dtype=np.int64)


def sample(seq, seed=0, *, stream=None, reference=False):
    """One run of Procedure A. Failure is returned as a value, not raised.

    ``seed`` is a 64-bit integer; ``stream`` (a uint32) overrides the
    derivation and is what estimators pass for their sub-streams.
    """
    if stream is None:
        stream = stream_seed(seed)
    if reference or not fits_int64(seq):
        success, log_p, order, valve = run_reference(seq, stream)
    else:
        corr = 1 if uses_degree_correction(seq) else 0
        success, log_p, order, valve = _kernels.procedure_a(
            degree_array(seq), seq.m, seq.d_max, corr, np.uint32(stream))
    return _make_sample(seq, success, log_p, order, seed, valve)


def sample_log_n_batch(seq, stream, k):
    """log N for k consecutive runs on one stream (``-inf`` marks failure)."""
    log_m_fact = log_factorial(seq.m)
    if fits_int64(seq):
        corr = 1 if uses_degree_correction(seq) else 0
        success, log_p = _kernels.procedure_a_batch(
            degree_array(seq), seq.m, seq.d_max, corr, np.uint32(stream), k)
        out = -log_m_fact - log_p
        out[~success] = NEG_INF
        return out
    rng = np.random.RandomState(stream)
    out = np.empty(k)
    for t in range(k):
        state = SamplerState(seq)
        try:
            while not state.done:
                state.step(rng)
            out[t] = -log_m_fact - state.log_p
        except FailureDetected:
            out[t] = NEG_INF
    return out


def verify_graph(seq, edges):
    """True iff ``edges`` is a simple graph realizing ``seq``."""
    deg = [0] * seq.n
    seen = set()
    for u, v in edges:
        if u == v or not (0 <= u < seq.n and 0 <= v < seq.n):
            return False
        key = (min(u, v), max(u, v))
        if key in seen:
            return False
        seen.add(key)
        deg[u] += 1
        deg[v] += 1
    return tuple(deg) == seq.degrees
