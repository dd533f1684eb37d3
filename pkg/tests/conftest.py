import itertools

import numpy as np
import pytest
from hypothesis import settings

from embinterp.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def complete_edges(nodes):
    return list(itertools.combinations(nodes, 2))


@pytest.fixture
def two_triangles():
    return Graph.from_edges(complete_edges([0, 1, 2]) + complete_edges([3, 4, 5]), 6)


@pytest.fixture
def two_k5():
    return Graph.from_edges(complete_edges(range(5)) + complete_edges(range(5, 10)), 10,
                            [f"n{i}" for i in range(10)])


def erdos_renyi(n, p, seed):
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), n)


def planted_blocks(sizes, p_in, p_out, seed):
    rng = np.random.default_rng(seed)
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = block.size
    pairs = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < (p_in if block[u] == block[v] else p_out):
                pairs.append((u, v))
    return Graph.from_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), n), block
