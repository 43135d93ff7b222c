import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lpakit.generators import complete_bipartite  # noqa: E402
from lpakit.graph import EdgeList, build_csr  # noqa: E402


def make_graph(edges, n=None):
    return build_csr(EdgeList.from_tuples(edges, n_declared=n))


def random_edges(rng, n, p, weighted=False, loops=False):
    edges = []
    for u in range(n):
        for v in range(u if loops else u + 1, n):
            if rng.random() < p:
                w = float(rng.uniform(0.1, 5.0)) if weighted else 1.0
                edges.append((u, v, w))
    return edges


@pytest.fixture
def single_edge():
    return make_graph([(0, 1)])


@pytest.fixture
def triangle():
    return make_graph([(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def two_triangles():
    return make_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def k22():
    return build_csr(complete_bipartite(2, 2))


@pytest.fixture
def two_k5_bridge():
    edges = [(a, b) for a in range(5) for b in range(a + 1, 5)]
    edges += [(a + 5, b + 5) for a in range(5) for b in range(a + 1, 5)]
    edges.append((4, 5))
    return make_graph(edges), np.array([0] * 5 + [1] * 5, dtype=np.int32), edges


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
