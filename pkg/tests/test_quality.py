import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpakit.errors import ValidationError
from lpakit.graph import EdgeList, build_csr
from lpakit.quality import community_stats, delta_modularity, modularity

from conftest import make_graph, random_edges
from oracles import modularity_bruteforce, undirected_adjacency


def test_single_community_is_zero(triangle):
    assert modularity(triangle, [0, 0, 0]) == pytest.approx(0.0, abs=1e-15)


def test_single_edge_identity_is_lower_bound(single_edge):
    assert modularity(single_edge, [0, 1]) == pytest.approx(-0.5)


def test_two_cliques_with_bridge(two_k5_bridge):
    g, labels, edges = two_k5_bridge
    ref = modularity_bruteforce(undirected_adjacency([(u, v, 1.0) for u, v in edges], 10), labels)
    assert ref == pytest.approx(19 / 42, abs=1e-12)
    assert modularity(g, labels) == pytest.approx(ref, abs=1e-12)


def test_edgeless_graph_rejected():
    with pytest.raises(ValidationError):
        modularity(build_csr(EdgeList.from_tuples([], n_declared=3)), [0, 1, 2])


def test_wrong_label_count(triangle):
    with pytest.raises(ValidationError):
        modularity(triangle, [0, 1])


def test_community_stats_triangle(triangle):
    s = community_stats(triangle, [0, 0, 1])
    assert s.count == 2
    assert s.sizes == {2: 1, 1: 1}


def test_community_stats_edgeless():
    g = build_csr(EdgeList.from_tuples([], n_declared=5))
    assert community_stats(g, np.arange(5)).count == 5


def test_community_stats_conservation(two_k5_bridge):
    g, labels, _ = two_k5_bridge
    s = community_stats(g, labels)
    assert s.Sigma.sum() == pytest.approx(g.total_weight_2m)
    assert sum(size * c for size, c in s.sizes.items()) == g.n
    assert np.all((0 <= s.sigma) & (s.sigma <= s.Sigma))


def test_delta_isolated_vertex_is_zero():
    assert delta_modularity(5.0, 0.0, 0.0, 0.0, 3.0, 4.0) == 0.0


def test_delta_self_move_is_zero():
    # c == d with Sigma_c taken as the total of d without i
    K_i, K_d, Sigma_d = 3.0, 2.0, 10.0
    assert delta_modularity(7.0, K_i, K_d, K_d, Sigma_d - K_i, Sigma_d) == pytest.approx(0.0)


def _instance(rng):
    n = int(rng.integers(2, 9))
    edges = random_edges(rng, n, float(rng.uniform(0.2, 1.0)), weighted=True, loops=True)
    if not edges:
        edges = [(0, 1, float(rng.uniform(0.1, 5.0)))]
    labels = rng.integers(0, n, size=n)
    return n, edges, labels


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_modularity_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n, edges, labels = _instance(rng)
    g = make_graph(edges, n)
    q = modularity(g, labels)
    assert q == pytest.approx(modularity_bruteforce(undirected_adjacency(edges, n), labels),
                              abs=1e-9)
    assert -0.5 - 1e-9 <= q <= 1 + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n, edges, labels = _instance(rng)
    g = make_graph(edges, n)
    perm = rng.permutation(n)
    assert modularity(g, perm[labels]) == pytest.approx(modularity(g, labels), abs=1e-12)


def single_move_deltas(g, A, labels):
    """Yield (formula ΔQ, Q-difference) for every vertex and every other community."""
    m = A.sum() / 2
    K = A.sum(axis=1)
    q0 = modularity_bruteforce(A, labels)
    comms = sorted(set(labels.tolist())) + [int(labels.max()) + 1]
    for i in range(len(labels)):
        d = labels[i]
        for c in comms:
            if c == d:
                continue
            k_c = sum(A[i, j] for j in range(len(labels)) if j != i and labels[j] == c)
            k_d = sum(A[i, j] for j in range(len(labels)) if j != i and labels[j] == d)
            s_c = K[labels == c].sum()
            s_d = K[labels == d].sum()
            moved = labels.copy()
            moved[i] = c
            yield (delta_modularity(m, K[i], k_c, k_d, s_c, s_d),
                   modularity_bruteforce(A, moved) - q0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_delta_matches_q_difference(seed):
    rng = np.random.default_rng(seed)
    n, edges, labels = _instance(rng)
    g = make_graph(edges, n)
    for dq, ref in single_move_deltas(g, undirected_adjacency(edges, n), labels):
        assert dq == pytest.approx(ref, abs=1e-9)
