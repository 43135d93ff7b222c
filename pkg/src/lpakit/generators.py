"""Synthetic graphs for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from .graph import EdgeList

__all__ = ["planted_partition", "ring_of_cliques", "star", "complete_bipartite"]


def planted_partition(n_communities: int, size: int, p_in: float, p_out: float,
                      seed=None):
    """Planted-partition graph and its ground-truth labels.

    Vertices ``[c*size, (c+1)*size)`` form community ``c``. Each intra pair is
    an edge with probability ``p_in``, each inter pair with ``p_out``.
    Returns ``(EdgeList, truth)`` where ``truth`` is an int32 label array.
    """
    rng = np.random.default_rng(seed)
    n = n_communities * size
    truth = np.repeat(np.arange(n_communities, dtype=np.int32), size)

    iu, ju = np.triu_indices(size, 1)
    src, dst = [], []
    # one community per step keeps peak memory at O(size^2)
    for c in range(n_communities):
        hit = rng.random(len(iu)) < p_in
        src.append(iu[hit] + c * size)
        dst.append(ju[hit] + c * size)

    n_pairs = n * (n - 1) // 2 - n_communities * (size * (size - 1) // 2)
    want = rng.binomial(n_pairs, p_out) if n_pairs > 0 and p_out > 0 else 0
    if want:
        seen = np.empty(0, dtype=np.int64)
        while len(seen) < want:
            k = int((want - len(seen)) * 1.2) + 16
            u = rng.integers(0, n, k)
            v = rng.integers(0, n, k)
            ok = truth[u] != truth[v]
            lo, hi = np.minimum(u[ok], v[ok]), np.maximum(u[ok], v[ok])
            seen = np.unique(np.concatenate([seen, lo * n + hi]))
        pick = rng.choice(len(seen), size=want, replace=False)
        chosen = seen[np.sort(pick)]
        src.append(chosen // n)
        dst.append(chosen % n)

    u = np.concatenate(src) if src else np.empty(0, dtype=np.int64)
    v = np.concatenate(dst) if dst else np.empty(0, dtype=np.int64)
    el = EdgeList(u, v, np.ones(len(u)), n_declared=n)
    return el, truth


def ring_of_cliques(n_cliques: int, clique_size: int) -> EdgeList:
    """Cliques joined in a cycle, clique ``c`` to ``c+1`` by one edge."""
    edges = []
    for c in range(n_cliques):
        base = c * clique_size
        for a in range(clique_size):
            for b in range(a + 1, clique_size):
                edges.append((base + a, base + b))
        if n_cliques > 1:
            nxt = ((c + 1) % n_cliques) * clique_size
            edges.append((base, nxt + clique_size - 1))
    el = EdgeList.from_tuples(edges, n_declared=n_cliques * clique_size)
    return el


def star(n_leaves: int) -> EdgeList:
    """Vertex 0 joined to leaves ``1..n_leaves``."""
    return EdgeList.from_tuples([(0, j) for j in range(1, n_leaves + 1)],
                                n_declared=n_leaves + 1)


def complete_bipartite(a: int, b: int) -> EdgeList:
    """K_{a,b} with sides ``[0, a)`` and ``[a, a+b)``."""
    return EdgeList.from_tuples([(i, a + j) for i in range(a) for j in range(b)],
                                n_declared=a + b)
