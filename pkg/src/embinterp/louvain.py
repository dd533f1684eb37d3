"""Modularity and Louvain community detection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import DataError, Graph, NodeGrouping

log = logging.getLogger(__name__)

MOVE_TOLERANCE = 1e-9


@dataclass
class CommunityAssignment:
    communities: np.ndarray
    num_communities: int
    modularity: float
    seed: int | None = None
    resolution: float = 1.0

    def grouping(self) -> NodeGrouping:
        return NodeGrouping.from_partition(self.communities)

    def summary(self) -> dict:
        return {"num_communities": self.num_communities, "modularity": self.modularity,
                "seed": self.seed, "resolution": self.resolution}


class WeightedGraph:
    """Symmetric weighted graph used between Louvain levels.

    ``adj[i]`` maps neighbor -> edge weight (no self entries); ``inner[i]`` is the
    weight of edges folded inside super-node ``i``.
    """

    def __init__(self, adj: list[dict[int, float]], inner: list[float]):
        self.adj = adj
        self.inner = inner
        self.degree = [2.0 * inner[i] + sum(adj[i].values()) for i in range(len(adj))]
        self.total_weight = sum(self.degree) / 2.0

    @classmethod
    def from_graph(cls, graph: Graph) -> "WeightedGraph":
        adj = []
        for u in range(graph.num_nodes):
            adj.append({int(v): 1.0 for v in graph.neighbors(u)})
        return cls(adj, [0.0] * graph.num_nodes)

    def __len__(self) -> int:
        return len(self.adj)

    def aggregate(self, comm: list[int], k: int) -> "WeightedGraph":
        adj: list[dict[int, float]] = [{} for _ in range(k)]
        inner = [0.0] * k
        for i, nbrs in enumerate(self.adj):
            ci = comm[i]
            inner[ci] += self.inner[i]
            for j, w in nbrs.items():
                cj = comm[j]
                if ci == cj:
                    inner[ci] += w / 2.0  # each internal edge is seen from both ends
                else:
                    adj[ci][cj] = adj[ci].get(cj, 0.0) + w
        return WeightedGraph(adj, inner)

    def modularity(self, comm: list[int] | np.ndarray, resolution: float = 1.0) -> float:
        m = self.total_weight
        if m == 0:
            raise DataError("modularity is undefined on an edgeless graph")
        k = int(max(comm)) + 1
        internal = np.zeros(k)
        tot = np.zeros(k)
        for i, nbrs in enumerate(self.adj):
            ci = comm[i]
            internal[ci] += self.inner[i]
            tot[ci] += self.degree[i]
            for j, w in nbrs.items():
                if comm[j] == ci:
                    internal[ci] += w / 2.0
        return float(np.sum(internal / m - resolution * (tot / (2.0 * m)) ** 2))


def modularity(graph: Graph, assignment, resolution: float = 1.0) -> float:
    """Q = sum_c [e_c / m - resolution * (d_c / 2m)^2] for an unweighted graph."""
    comm = assignment.communities if isinstance(assignment, CommunityAssignment) else assignment
    comm = np.asarray(comm, dtype=np.int64)
    if comm.shape[0] != graph.num_nodes:
        raise ValueError("assignment does not cover every node")
    m = graph.num_edges
    if m == 0:
        raise DataError("modularity is undefined on an edgeless graph")
    edges = graph.edges()
    same = comm[edges[:, 0]] == comm[edges[:, 1]]
    k = int(comm.max()) + 1
    e_c = np.bincount(comm[edges[same, 0]], minlength=k).astype(np.float64)
    d_c = np.bincount(comm, weights=graph.degrees().astype(np.float64), minlength=k)
    return float(np.sum(e_c / m - resolution * (d_c / (2.0 * m)) ** 2))


def _local_moves(wg: WeightedGraph, resolution: float, rng: np.random.Generator) -> tuple[list[int], bool]:
    n = len(wg)
    comm = list(range(n))
    tot = list(wg.degree)
    m2 = 2.0 * wg.total_weight
    order = rng.permutation(n)
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            i = int(i)
            ci = comm[i]
            ki = wg.degree[i]
            links: dict[int, float] = {}
            for j, w in wg.adj[i].items():
                cj = comm[j]
                links[cj] = links.get(cj, 0.0) + w
            tot[ci] -= ki
            # gain of inserting i into c, up to the common 1/m factor
            best_c = ci
            best_gain = links.get(ci, 0.0) - resolution * tot[ci] * ki / m2
            for c in sorted(links):
                if c == ci:
                    continue
                gain = links[c] - resolution * tot[c] * ki / m2
                if gain > best_gain + MOVE_TOLERANCE:
                    best_c, best_gain = c, gain
                elif best_c != ci and abs(gain - best_gain) <= MOVE_TOLERANCE and c < best_c:
                    best_c = c
            tot[best_c] += ki
            if best_c != ci:
                comm[i] = best_c
                improved = True
                moved_any = True
    return comm, moved_any


def _relabel(comm: list[int]) -> tuple[list[int], int]:
    mapping: dict[int, int] = {}
    out = []
    for c in comm:
        out.append(mapping.setdefault(c, len(mapping)))
    return out, len(mapping)


def louvain(graph: Graph, resolution: float = 1.0, seed: int = 0) -> CommunityAssignment:
    """Two-phase Louvain: greedy local moves, then aggregation, until no pass improves.

    Node visiting order is shuffled once per level from ``seed``. Community ids
    in the result are dense and ordered by first appearance over node ids.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    n = graph.num_nodes
    if graph.num_edges == 0:
        log.warning("edgeless graph: every node is its own community, modularity reported as 0")
        return CommunityAssignment(np.arange(n, dtype=np.int64), n, 0.0, seed, resolution)
    rng = np.random.default_rng(seed)
    wg = WeightedGraph.from_graph(graph)
    node_comm = list(range(n))
    while True:
        comm, moved = _local_moves(wg, resolution, rng)
        if not moved:
            break
        comm, k = _relabel(comm)
        node_comm = [comm[c] for c in node_comm]
        wg = wg.aggregate(comm, k)
    final, k = _relabel(node_comm)
    arr = np.asarray(final, dtype=np.int64)
    return CommunityAssignment(arr, k, modularity(graph, arr, resolution), seed, resolution)


def write_assignment(graph: Graph, assignment: CommunityAssignment, dest) -> None:
    lines = ["node,community\n"]
    lines += [f"{graph.ids[u]},{c}\n" for u, c in enumerate(assignment.communities)]
    with open(dest, "w", encoding="utf-8") as fh:
        fh.writelines(lines)


def read_assignment(source, graph: Graph) -> NodeGrouping:
    """Read a ``node,community`` CSV into a partition grouping over ``graph``."""
    labels = np.full(graph.num_nodes, -1, dtype=np.int64)
    with open(source, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "node,community":
            raise DataError(f"{source}: expected header node,community")
        for line in fh:
            if not line.strip():
                continue
            node, c = line.rstrip("\n").rsplit(",", 1)
            if not graph.has_node(node):
                raise DataError(f"{source}: unknown node {node!r}")
            labels[graph.index_of(node)] = int(c)
    if (labels < 0).any():
        raise DataError(f"{source}: {int((labels < 0).sum())} node(s) without a community")
    return NodeGrouping.from_partition(labels)
