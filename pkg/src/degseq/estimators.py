"""Sequential importance sampling estimators built on Procedure A.

* :func:`count_graphs` averages N = 1/(m! P) over independent runs.
* :func:`procedure_b` estimates P_A(G) by pricing random edge orderings of G.
* :func:`generate_uniform` turns Procedure A samples into near-uniform ones
  by accepting G with probability 1 / (5 X P_G).

Trials run in fixed-size chunks; chunk c always draws from the stream
``chunk_seeds(seed, purpose, [c])``, so results do not depend on how many
worker threads executed the chunks.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import functools
from fractions import Fraction
import logging
import math
import os

import numpy as np
import scipy.stats

from . import _kernels
from .logspace import NEG_INF, log_factorial, log_mean_and_relvar, log_sum_exp
from .sampler import (
    SamplerState,
    _make_sample,
    chunk_seeds,
    degree_array,
    fits_int64,
    run_reference_rng,
    sample,
    sample_log_n_batch,
    stream_seed,
    uses_degree_correction,
    verify_graph,
)

log = logging.getLogger(__name__)

CHUNK = 1024
# Procedure B runs once per generate attempt, so its top-up granularity matters more
B_CHUNK = 128
PILOT_MIN = 1000

# sub-stream tags for stream_seed
COUNT_STREAM = 0
GENERATE_STREAM = 1
PROC_B_STREAM = 2


class AllTrialsFailed(RuntimeError):
    """Every pilot run of Procedure A failed."""


class EdgeSetMismatch(ValueError):
    """The graph handed to Procedure B does not realize the degree sequence."""


def thread_count(threads=None):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("DEGSEQ_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@functools.lru_cache(maxsize=64)
def z_quantile(delta):
    """Two-sided normal quantile: P(|Z| > z) = delta."""
    return float(scipy.stats.norm.isf(delta / 2.0))


def pilot_size(epsilon):
    return max(PILOT_MIN, math.ceil(1.0 / epsilon ** 2))


def extra_trials(relvar, epsilon, delta):
    if not math.isfinite(relvar):
        return 0
    return math.ceil(z_quantile(delta) ** 2 * relvar / epsilon ** 2)


def _check_params(epsilon, delta):
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


class _ChunkedTrials:
    """Lazily computed trial values, addressable by global trial index.

    ``run_chunks(cs)`` returns one array of ``chunk`` values per index in cs.
    """

    def __init__(self, run_chunks, threads, chunk=CHUNK):
        self.run_chunks = run_chunks
        self.threads = threads
        self.chunk = chunk
        self.chunks = {}

    def take(self, k):
        needed = [c for c in range(math.ceil(k / self.chunk)) if c not in self.chunks]
        if self.threads > 1 and len(needed) > 1:
            groups = [needed[w::self.threads] for w in range(self.threads)]
            groups = [g for g in groups if g]
            with ThreadPoolExecutor(len(groups)) as pool:
                for group, vals in zip(groups, pool.map(self.run_chunks, groups)):
                    self.chunks.update(zip(group, vals))
        elif needed:
            self.chunks.update(zip(needed, self.run_chunks(needed)))
        return np.concatenate([self.chunks[c] for c in sorted(self.chunks)])[:k]


def _two_stage(trials, epsilon, delta):
    """Pilot, estimate Var/mean^2, then top up; returns (values, pilot relvar)."""
    pilot = trials.take(pilot_size(epsilon))
    if not np.isfinite(pilot).any():
        raise AllTrialsFailed(f"all {len(pilot)} pilot trials failed")
    _, relvar = log_mean_and_relvar(pilot)
    k = len(pilot) + extra_trials(relvar, epsilon, delta)
    return trials.take(k), relvar


@dataclass(frozen=True)
class CountEstimate:
    n: int
    m: int
    log_mean: float
    log_second_moment: float
    k: int
    failures: int
    rel_std_err: float
    epsilon: float
    delta: float
    seed: int
    pilot_relvar: float = math.nan

    @property
    def estimate(self):
        return math.exp(self.log_mean)

    @property
    def log10_count(self):
        return self.log_mean / math.log(10.0)

    def to_dict(self):
        log10 = self.log10_count
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "failures": self.failures,
            "log10_count": log10,
            "count_if_small": int(round(self.estimate)) if log10 < 18 else None,
            "rel_std_err": self.rel_std_err,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
        }


def summarize_log_n(seq, values, epsilon, delta, seed, pilot_relvar=math.nan):
    k = len(values)
    log_mean, relvar = log_mean_and_relvar(values)
    log_second = log_sum_exp(2.0 * np.asarray(values)) - math.log(k)
    return CountEstimate(
        n=seq.n,
        m=seq.m,
        log_mean=log_mean,
        log_second_moment=log_second,
        k=k,
        failures=int(np.sum(~np.isfinite(values))),
        rel_std_err=math.sqrt(relvar / k) if math.isfinite(relvar) else math.nan,
        epsilon=epsilon,
        delta=delta,
        seed=seed,
        pilot_relvar=pilot_relvar,
    )


def count_trials(seq, seed, threads=None):
    """Trial source of log N values for ``seq`` (``-inf`` marks a failed run)."""

    def run_chunks(cs):
        return [sample_log_n_batch(seq, int(s), CHUNK)
                for s in chunk_seeds(seed, COUNT_STREAM, cs)]

    return _ChunkedTrials(run_chunks, thread_count(threads))


def count_graphs(seq, epsilon=0.05, delta=0.05, seed=0, threads=None):
    """Estimate the number of labeled simple graphs with degree sequence ``seq``."""
    _check_params(epsilon, delta)
    if seq.m == 0:
        return CountEstimate(seq.n, 0, 0.0, 0.0, 1, 0, 0.0, epsilon, delta, seed, 0.0)
    values, relvar = _two_stage(count_trials(seq, seed, threads), epsilon, delta)
    est = summarize_log_n(seq, values, epsilon, delta, seed, relvar)
    log.debug("count_graphs: k=%d failures=%d relvar=%.4g", est.k, est.failures, relvar)
    return est


@dataclass(frozen=True)
class ProbEstimate:
    log_p_g: float
    ell: int
    epsilon: float
    delta: float
    pilot_relvar: float = math.nan

    @property
    def estimate(self):
        return math.exp(self.log_p_g)


def price_ordering(seq, ordering):
    """log of the probability that Procedure A places the edges in this order."""
    state = SamplerState(seq)
    for i, j in ordering:
        w = state.pair_weight(i, j)
        mass = state.mass8()
        state.apply_edge(i, j, math.log(float(2 * w)) - math.log(float(mass)))
    return state.log_p


def ordering_probability(seq, ordering):
    """Exact rational version of :func:`price_ordering`."""
    state = SamplerState(seq)
    prob = Fraction(1)
    for i, j in ordering:
        prob *= state.pair_probability(i, j)
        state.apply_edge(i, j)
    return prob


def shuffled_order(rng, m):
    """Python mirror of the kernel shuffle: Fisher-Yates with packed swap indices."""
    order = list(range(m))
    hi = m - 1
    while hi > 0:
        span, lo = hi + 1, hi - 1
        while lo > 0 and span * (lo + 1) <= _kernels.PACK_LIMIT:
            span *= lo + 1
            lo -= 1
        x = int(rng.random_sample() * span)
        for a in range(hi, lo, -1):
            x, b = divmod(x, a + 1)
            order[a], order[b] = order[b], order[a]
        hi = lo
    return order


def _b_trials_reference(seq, edges, rng, count):
    out = np.empty(count)
    for t in range(count):
        order = shuffled_order(rng, len(edges))
        out[t] = price_ordering(seq, [edges[o] for o in order])
    return out


def _b_batch_reference(seq, edges, stream, ell):
    return _b_trials_reference(seq, edges, np.random.RandomState(stream), ell)


def procedure_b_trials(seq, edges, seed, threads=None, reference=False):
    """Trial source of log P for uniformly random orderings of ``edges``."""
    edges = [(min(u, v), max(u, v)) for u, v in edges]
    if reference or not fits_int64(seq):
        def run_chunks(cs):
            return [_b_batch_reference(seq, edges, int(s), B_CHUNK)
                    for s in chunk_seeds(seed, PROC_B_STREAM, cs)]
    else:
        deg = degree_array(seq)
        corr = 1 if uses_degree_correction(seq) else 0
        eu = np.array([e[0] for e in edges], dtype=np.int64)
        ev = np.array([e[1] for e in edges], dtype=np.int64)

        def run_chunks(cs):
            vals = _kernels.procedure_b_batch(
                deg, seq.m, seq.d_max, corr, eu, ev, chunk_seeds(seed, PROC_B_STREAM, cs),
                B_CHUNK)
            return np.split(vals, len(cs))

    return _ChunkedTrials(run_chunks, thread_count(threads), B_CHUNK)


def procedure_b(edges, seq, epsilon=0.05, delta=0.05, seed=0, threads=None):
    """Estimate P_A(G) as m! times the mean probability of random orderings of G."""
    _check_params(epsilon, delta)
    if not verify_graph(seq, edges):
        raise EdgeSetMismatch("edge list does not realize the degree sequence")
    if seq.m == 0:
        return ProbEstimate(0.0, 1, epsilon, delta, 0.0)
    values, relvar = _two_stage(procedure_b_trials(seq, edges, seed, threads), epsilon, delta)
    log_mean, _ = log_mean_and_relvar(values)
    return ProbEstimate(log_factorial(seq.m) + log_mean, len(values), epsilon, delta, relvar)


@dataclass
class GenerateStats:
    attempts: int = 0
    a_failures: int = 0
    acceptance_overflow: int = 0


@dataclass
class GenerateResult:
    samples: list
    count: CountEstimate
    stats: list = field(default_factory=list)

    @property
    def acceptance_overflow(self):
        return sum(s.acceptance_overflow for s in self.stats)


_LOG5 = math.log(5.0)


def _generate_reference(seq, stream, log_x, pilot, z2_eps2, max_attempts):
    """Python mirror of ``_kernels.generate_batch`` for one sample."""
    rng = np.random.RandomState(stream)
    stats = GenerateStats()
    log_m_fact = log_factorial(seq.m)
    while stats.attempts < max_attempts:
        stats.attempts += 1
        ok, log_p, order, _ = run_reference_rng(seq, rng)
        if not ok:
            stats.a_failures += 1
            continue
        vals = _b_trials_reference(seq, order, rng, pilot)
        _, relvar = _kernels.log_mean_relvar(vals, pilot)
        extra = _b_trials_reference(seq, order, rng, math.ceil(z2_eps2 * relvar))
        vals = np.concatenate([vals, extra])
        log_mean, _ = _kernels.log_mean_relvar(vals, len(vals))
        log_accept = -_LOG5 - log_x - (log_m_fact + log_mean)
        u = rng.random_sample()
        if log_accept >= 0.0:
            stats.acceptance_overflow += 1
            return order, log_p, stats
        if math.log(u) < log_accept:
            return order, log_p, stats
    raise AllTrialsFailed(f"no sample accepted within {max_attempts} attempts")


def _generate_compiled(seq, seeds, log_x, pilot, z2_eps2, max_attempts):
    corr = 1 if uses_degree_correction(seq) else 0
    edges, log_p, attempts, failures, overflow = _kernels.generate_batch(
        degree_array(seq), seq.m, seq.d_max, corr, np.asarray(seeds, dtype=np.uint32),
        log_x, log_factorial(seq.m), pilot, z2_eps2, max_attempts)
    if (attempts < 0).any():
        raise AllTrialsFailed(f"no sample accepted within {max_attempts} attempts")
    return [
        (edges[s], log_p[s], GenerateStats(int(attempts[s]), int(failures[s]), int(overflow[s])))
        for s in range(len(seeds))
    ]


def generate_uniform(seq, epsilon=0.05, delta=0.05, seed=0, samples=1, count=None,
                     threads=None, max_attempts=100_000, reference=False):
    """Draw ``samples`` graphs whose law is an (epsilon, delta)-approximation of uniform.

    The count estimate X is computed once (or passed in) and shared by all
    samples. Sample s uses its own stream, so output does not depend on threads.
    """
    _check_params(epsilon, delta)
    if count is None:
        count = count_graphs(seq, epsilon, delta, seed, threads)
    log_x = count.log_mean
    pilot = pilot_size(epsilon)
    z2_eps2 = z_quantile(delta) ** 2 / epsilon ** 2
    seeds = [stream_seed(seed, GENERATE_STREAM, s) for s in range(samples)]

    if seq.m == 0:
        results = [((), 0.0, GenerateStats(attempts=1)) for _ in seeds]
    elif reference or not fits_int64(seq):
        results = [_generate_reference(seq, st, log_x, pilot, z2_eps2, max_attempts)
                   for st in seeds]
    else:
        workers = min(thread_count(threads), samples)
        if workers > 1:
            blocks = [seeds[w::workers] for w in range(workers)]
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(
                    lambda b: _generate_compiled(seq, b, log_x, pilot, z2_eps2, max_attempts),
                    blocks))
            results = [None] * samples
            for w, part in enumerate(parts):
                results[w::workers] = part
        else:
            results = _generate_compiled(seq, seeds, log_x, pilot, z2_eps2, max_attempts)

    graphs = [_make_sample(seq, True, log_p, order, seed, 0) for order, log_p, _ in results]
    out = GenerateResult(graphs, count, [st for _, _, st in results])
    if out.acceptance_overflow:
        log.warning("acceptance probability exceeded 1 in %d attempts (clamped)",
                    out.acceptance_overflow)
    return out


def generate_fast(seq, seed=0, samples=1, max_retries=100):
    """Raw Procedure A samples, retrying failed runs up to ``max_retries`` times each."""
    rs = np.random.RandomState(stream_seed(seed, GENERATE_STREAM, 2 ** 32))
    out = []
    attempts = []
    for _ in range(samples):
        for a in range(1, max_retries + 1):
            g = sample(seq, seed, stream=int(rs.randint(2 ** 32, dtype=np.uint64)))
            if g.success:
                break
        else:
            raise AllTrialsFailed(f"Procedure A failed {max_retries} times in a row")
        if not verify_graph(seq, g.edges):
            raise AssertionError("sampler produced an invalid graph")
        out.append(g)
        attempts.append(a)
    return out, attempts
