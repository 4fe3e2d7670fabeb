import itertools
import json
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from degseq import estimators
from degseq.degrees import DegreeSequence, DegreeSequenceError
from degseq.oracle import (
    FAILURE,
    InstanceTooLarge,
    UnknownGraph,
    brute_force_count,
    chi_square_uniformity,
    count_graphs_exact,
    enumerate_graphs,
    exact_distribution,
    expected_n_by_paths,
    ordering_probability,
)
from degseq.sampler import sample, uses_degree_correction

CYCLES = [
    ((0, 1), (0, 2), (1, 3), (2, 3)),
    ((0, 1), (0, 3), (1, 2), (2, 3)),
    ((0, 2), (0, 3), (1, 2), (1, 3)),
]


def graphical(n):
    for degs in itertools.product(range(n), repeat=n):
        try:
            yield DegreeSequence(degs)
        except DegreeSequenceError:
            pass


def law_by_dfs(seq):
    """Outcome law of the sequential process, by plain recursion over paths."""
    deg = seq.degrees
    m = seq.m
    corr = 1 if uses_degree_correction(seq) else 0
    out = Counter()

    def rec(edges, res, prob):
        if len(edges) == m:
            out[tuple(sorted(edges))] += prob
            return
        cand = {}
        for i in range(seq.n):
            for j in range(i + 1, seq.n):
                if res[i] and res[j] and (i, j) not in edges:
                    cand[(i, j)] = res[i] * res[j] * (1 - Fraction(corr * deg[i] * deg[j], 4 * m))
        if not cand:
            out[FAILURE] += prob
            return
        total = sum(cand.values())
        for (i, j), w in cand.items():
            nxt = list(res)
            nxt[i] -= 1
            nxt[j] -= 1
            rec(edges | {(i, j)}, nxt, prob * w / total)

    rec(frozenset(), list(deg), Fraction(1))
    return out


def test_enumeration_examples():
    assert enumerate_graphs(DegreeSequence((2, 2, 2, 2))) == CYCLES
    assert enumerate_graphs((3, 3, 1, 1)) == []
    assert count_graphs_exact(DegreeSequence((1, 1))) == 1
    assert count_graphs_exact(DegreeSequence.regular(6, 3)) == 70
    assert count_graphs_exact(DegreeSequence((3, 3, 2, 2, 2))) == 7


@pytest.mark.parametrize("n", range(1, 6))
def test_enumeration_matches_brute_force(n):
    for seq in graphical(n):
        graphs = enumerate_graphs(seq)
        assert len(graphs) == len(set(graphs)) == brute_force_count(seq)


def test_enumeration_guard():
    with pytest.raises(InstanceTooLarge):
        enumerate_graphs(DegreeSequence.regular(12, 2))
    with pytest.raises(InstanceTooLarge):
        exact_distribution(DegreeSequence.regular(7, 2))
    assert count_graphs_exact(DegreeSequence.regular(8, 3)) == 19355


def test_triangle_law():
    dist = exact_distribution(DegreeSequence((2, 2, 2)))
    assert dist.failure_prob == 0
    assert dist.per_graph == {((0, 1), (0, 2), (1, 2)): Fraction(1)}
    assert dist.expected_n == 1


def test_four_cycle_law():
    dist = exact_distribution(DegreeSequence((2, 2, 2, 2)))
    assert dist.failure_prob == Fraction(2, 15)
    assert set(dist.per_graph) == set(CYCLES)
    assert len(set(dist.per_graph.values())) == 1
    assert dist.per_graph[CYCLES[0]] == Fraction(13, 45)
    assert dist.expected_n == 3


@pytest.mark.parametrize("degs", [(2, 2, 2, 2), (2, 2, 1, 1), (3, 3, 2, 2, 2), (3, 2, 2, 2, 1)])
def test_law_matches_literal_dfs(degs):
    seq = DegreeSequence(degs)
    dist = exact_distribution(seq)
    ref = law_by_dfs(seq)
    assert ref.pop(FAILURE, 0) == dist.failure_prob
    assert dict(ref) == dist.per_graph


@pytest.mark.parametrize("n", range(1, 6))
def test_law_sums_to_one_and_is_unbiased(n):
    for seq in graphical(n):
        dist = exact_distribution(seq)
        assert dist.total() == 1
        assert dist.expected_n == dist.graph_count == count_graphs_exact(seq)


def test_path_sum_matches_tree():
    for degs in [(2, 2, 2, 2), (2, 2, 1, 1), (3, 3, 2, 2, 2), (1, 1, 1, 1)]:
        seq = DegreeSequence(degs)
        assert expected_n_by_paths(seq) == count_graphs_exact(seq)
    with pytest.raises(InstanceTooLarge):
        expected_n_by_paths(DegreeSequence.regular(6, 3), max_paths=100)


def test_ordering_probability_agrees_with_sampler_state():
    for degs in [(2, 2, 2, 2), (3, 3, 2, 2, 2), (2, 2, 1, 1)]:
        seq = DegreeSequence(degs)
        for g in enumerate_graphs(seq):
            for perm in itertools.permutations(g):
                assert ordering_probability(seq, perm) == estimators.ordering_probability(seq, perm)


@pytest.mark.parametrize("degs", [(2, 2, 2, 2), (2, 2, 1, 1)])
def test_sampler_frequencies_match_law(degs):
    seq = DegreeSequence(degs)
    dist = exact_distribution(seq)
    runs = 100_000
    counts = Counter()
    for s in range(runs):
        g = sample(seq, stream=s)
        counts[g.edges if g.success else FAILURE] += 1
    law = dict(dist.per_graph)
    law[FAILURE] = dist.failure_prob
    assert set(counts) <= set(law)
    for key, p in law.items():
        p = float(p)
        sigma = math.sqrt(runs * p * (1 - p))
        assert abs(counts[key] - runs * p) <= 4 * sigma, key


def test_json_export():
    dist = exact_distribution(DegreeSequence((2, 2, 2, 2)))
    data = json.loads(dist.to_json())
    assert data["count"] == 3
    assert Fraction(data["failure_prob_num"], data["failure_prob_den"]) == Fraction(2, 15)
    assert [tuple(map(tuple, g["edges"])) for g in data["graphs"]] == CYCLES
    assert sum(Fraction(g["p_num"], g["p_den"]) for g in data["graphs"]) == Fraction(13, 15)


def test_chi_square_uniform_and_degenerate():
    rng = np.random.default_rng(0)
    picks = rng.integers(0, 3, size=30_000)
    samples = [CYCLES[k] for k in picks]
    _, p = chi_square_uniformity(samples, CYCLES)
    assert p > 0.001
    _, p = chi_square_uniformity([CYCLES[0]] * 30_000, CYCLES)
    assert p < 1e-12


def test_chi_square_errors():
    with pytest.raises(ValueError):
        chi_square_uniformity([CYCLES[0]] * 29, CYCLES)
    with pytest.raises(UnknownGraph):
        chi_square_uniformity([((0, 1),)] * 30, CYCLES)
