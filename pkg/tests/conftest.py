import numpy as np
import pytest

from llata.graph import Graph


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    # a - b - c as 0 - 1 - 2
    return Graph.from_edges(3, [(0, 1), (1, 2)])


def random_graph(n, p, seed, connected=False):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if connected:
        # chain a random permutation so every node has an edge
        perm = rng.permutation(n)
        edges += [(int(min(a, b)), int(max(a, b))) for a, b in zip(perm, perm[1:])]
    return Graph.from_edges(n, edges)
