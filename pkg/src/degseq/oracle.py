"""Ground truth for small instances.

Everything here works in exact rationals and recomputes pair weights from
their definition at every node; it shares no arithmetic with the sampler's
incremental aggregates.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import itertools
import json
import math

import scipy.stats

from .degrees import _erdos_gallai_violation
from .sampler import uses_degree_correction


class InstanceTooLarge(ValueError):
    pass


class UnknownGraph(ValueError):
    pass


FAILURE = "failure"


def _check_enumeration_size(degrees):
    n, m = len(degrees), sum(degrees) // 2
    # every n <= 6 instance is cheap (at most 2**15 labeled graphs)
    if n <= 6:
        return
    if n > 10 or m > 12:
        raise InstanceTooLarge(f"enumeration guard: n={n}, m={m}")


def _residual_graphical(res):
    if sum(res) % 2:
        return False
    if not res:
        return True
    return _erdos_gallai_violation(res) is None


def enumerate_graphs(seq):
    """All labeled simple graphs with degree sequence ``seq``, as sorted edge tuples.

    ``seq`` may be a DegreeSequence or any integer tuple; a non-graphical
    tuple simply has no realizations.
    """
    degrees = tuple(int(d) for d in getattr(seq, "degrees", seq))
    _check_enumeration_size(degrees)
    n = len(degrees)
    if any(d < 0 or d > n - 1 for d in degrees) or sum(degrees) % 2:
        return []
    found = []

    def extend(v, res, edges):
        if v == n:
            found.append(tuple(edges))
            return
        need = res[v]
        later = [u for u in range(v + 1, n) if res[u] > 0]
        if need > len(later):
            return
        for chosen in itertools.combinations(later, need):
            nxt = list(res)
            nxt[v] = 0
            for u in chosen:
                nxt[u] -= 1
            if not _residual_graphical(nxt[v + 1:]):
                continue
            extend(v + 1, nxt, edges + [(v, u) for u in chosen])

    extend(0, list(degrees), [])
    return sorted(found)


def brute_force_count(seq):
    """Count by testing every subset of the C(n, 2) possible edges (n <= 7)."""
    n = seq.n
    if n > 7:
        raise InstanceTooLarge(f"brute force needs n <= 7, got n={n}")
    pairs = list(itertools.combinations(range(n), 2))
    target = tuple(seq.degrees)
    count = 0
    for mask in range(1 << len(pairs)):
        if bin(mask).count("1") != seq.m:
            continue
        deg = [0] * n
        for t, (u, v) in enumerate(pairs):
            if mask >> t & 1:
                deg[u] += 1
                deg[v] += 1
        count += tuple(deg) == target
    return count


def count_graphs_exact(seq):
    return len(enumerate_graphs(seq))


@dataclass(frozen=True)
class ExactDistribution:
    per_graph: dict  # canonical edge tuple -> Fraction
    failure_prob: Fraction
    graph_count: int
    expected_n: Fraction  # E[N] over the execution tree

    def total(self):
        return self.failure_prob + sum(self.per_graph.values())

    def to_json(self):
        return json.dumps({
            "count": self.graph_count,
            "failure_prob_num": self.failure_prob.numerator,
            "failure_prob_den": self.failure_prob.denominator,
            "graphs": [
                {"edges": [list(e) for e in g], "p_num": p.numerator, "p_den": p.denominator}
                for g, p in sorted(self.per_graph.items())
            ],
        })


def _pair_weights(deg, corr, four_m, res, edges):
    n = len(deg)
    out = []
    for i in range(n):
        if res[i] == 0:
            continue
        for j in range(i + 1, n):
            if res[j] == 0 or (i, j) in edges:
                continue
            out.append(((i, j), Fraction(res[i] * res[j]) * (1 - Fraction(corr * deg[i] * deg[j], four_m))))
    return out


def _tree_walker(seq):
    deg = tuple(seq.degrees)
    m = seq.m
    four_m = 4 * m if m else 1
    corr = 1 if uses_degree_correction(seq) else 0

    def residual(edges):
        res = list(deg)
        for u, v in edges:
            res[u] -= 1
            res[v] -= 1
        return res

    @lru_cache(maxsize=None)
    def walk(edges):
        """(outcome -> prob from this node, number of successful completions)."""
        if len(edges) == m:
            return {edges: Fraction(1)}, 1
        weights = _pair_weights(deg, corr, four_m, residual(edges), set(edges))
        total = sum(w for _, w in weights)
        if not weights:
            return {FAILURE: Fraction(1)}, 0
        dist = {}
        completions = 0
        for pair, w in weights:
            child, child_completions = walk(tuple(sorted(edges + (pair,))))
            p = w / total
            completions += child_completions
            for key, q in child.items():
                dist[key] = dist.get(key, 0) + p * q
        return dist, completions

    return walk, residual, deg, corr, four_m


def exact_distribution(seq):
    """Exact law of Procedure A's output, by traversal of its execution tree.

    Nodes are memoized on the exact placed edge set (which determines the
    residual degrees), so the traversal is exact.
    """
    # the tree has m levels; small n or few levels keep the memo table small
    if not (seq.n <= 6 or (seq.m <= 5 and seq.n <= 10)):
        raise InstanceTooLarge(f"execution-tree guard: n={seq.n}, m={seq.m}")
    walk, *_ = _tree_walker(seq)
    dist, completions = walk(())
    failure = dist.pop(FAILURE, Fraction(0))
    count = len(enumerate_graphs(seq))
    # each successful path contributes P(path) * N(path) = 1/m!
    expected_n = Fraction(completions, math.factorial(seq.m))
    return ExactDistribution(dist, failure, count, expected_n)


def expected_n_by_paths(seq, max_paths=200_000):
    """E[N] as the literal sum over root-to-leaf paths of P(path) * N(path)."""
    _, residual, deg, corr, four_m = _tree_walker(seq)
    m = seq.m
    m_fact = math.factorial(m)
    budget = [max_paths]

    def dfs(edges, prob):
        if len(edges) == m:
            budget[0] -= 1
            if budget[0] < 0:
                raise InstanceTooLarge("path budget exhausted")
            return prob * (1 / (m_fact * prob))
        weights = _pair_weights(deg, corr, four_m, residual(edges), edges)
        if not weights:
            budget[0] -= 1
            return Fraction(0)
        total = sum(w for _, w in weights)
        return sum(dfs(edges | {pair}, prob * (w / total)) for pair, w in weights)

    return dfs(frozenset(), Fraction(1))


def ordering_probability(seq, ordering):
    """Exact probability that Procedure A places the edges in exactly this order."""
    _, residual, deg, corr, four_m = _tree_walker(seq)
    placed = []
    prob = Fraction(1)
    for e in ordering:
        e = (min(e), max(e))
        weights = dict(_pair_weights(deg, corr, four_m, residual(placed), set(placed)))
        if e not in weights:
            return Fraction(0)
        prob *= weights[e] / sum(weights.values())
        placed.append(e)
    return prob


def chi_square_uniformity(samples, support):
    """Pearson chi-square of ``samples`` against the uniform law on ``support``."""
    support = [tuple(g) for g in support]
    index = {g: t for t, g in enumerate(support)}
    if len(samples) < 10 * len(support):
        raise ValueError(f"need at least {10 * len(support)} samples, got {len(samples)}")
    counts = [0] * len(support)
    for g in samples:
        t = index.get(tuple(g))
        if t is None:
            raise UnknownGraph(f"sample outside the support: {g}")
        counts[t] += 1
    stat, p = scipy.stats.chisquare(counts)
    return float(stat), float(p)
