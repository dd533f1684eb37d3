"""Undirected graphs in compressed adjacency form, node groupings and graph statistics."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DataError(ValueError):
    """Input is well-formed but inconsistent (unknown ids, impossible requests)."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected, unweighted graph.

    ``indptr``/``indices`` are CSR arrays: the neighbors of dense node ``u`` are
    ``indices[indptr[u]:indptr[u + 1]]``, sorted ascending. ``ids[u]`` is the
    external id of ``u``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    ids: tuple[str, ...]
    dropped_self_loops: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._index is None:
            object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.ids)})
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False

    @property
    def num_nodes(self) -> int:
        return len(self.ids)

    @property
    def num_edges(self) -> int:
        return int(self.indices.shape[0]) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def has_node(self, name: str) -> bool:
        return name in self._index

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.shape[0] and nbrs[i] == v)

    def edges(self) -> np.ndarray:
        """All edges as an ``(E, 2)`` array with ``u < v``, sorted lexicographically."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def to_scipy(self) -> csr_matrix:
        n = self.num_nodes
        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]] | np.ndarray, num_nodes: int,
                   ids: Sequence[str] | None = None) -> "Graph":
        """Build from dense-id pairs. Symmetrizes, deduplicates and drops self-loops."""
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        loops = int(np.count_nonzero(arr[:, 0] == arr[:, 1])) if arr.size else 0
        arr = arr[arr[:, 0] != arr[:, 1]]
        if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
            raise DataError("edge endpoint outside 0..num_nodes-1")
        both = np.concatenate([arr, arr[:, ::-1]]) if arr.size else arr
        if both.size:
            key = np.unique(both[:, 0] * num_nodes + both[:, 1])
            src, dst = key // num_nodes, key % num_nodes
        else:
            src = dst = np.zeros(0, dtype=np.int64)
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
        if ids is None:
            ids = [str(i) for i in range(num_nodes)]
        return cls(indptr, dst.astype(np.int32), tuple(ids), dropped_self_loops=loops)

    def relabeled(self, perm: np.ndarray) -> "Graph":
        """Isomorphic graph where old node ``u`` becomes ``perm[u]``."""
        perm = np.asarray(perm, dtype=np.int64)
        ids = [""] * self.num_nodes
        for u, name in enumerate(self.ids):
            ids[perm[u]] = name
        return Graph.from_edges(perm[self.edges()], self.num_nodes, ids)

    def subgraph_without(self, removed: np.ndarray) -> "Graph":
        """Same node set with the given ``(k, 2)`` edges deleted."""
        edges = self.edges()
        n = self.num_nodes
        rem = np.asarray(removed, dtype=np.int64).reshape(-1, 2)
        rem_key = np.minimum(rem[:, 0], rem[:, 1]) * n + np.maximum(rem[:, 0], rem[:, 1])
        keep = ~np.isin(edges[:, 0] * n + edges[:, 1], rem_key)
        return Graph.from_edges(edges[keep], n, self.ids)


@dataclass
class NodeGrouping:
    """Assignment of nodes to ``num_groups`` groups.

    ``membership[u]`` is the tuple of group ids of dense node ``u``; for a
    partition every tuple has exactly one element.
    """

    kind: str
    num_groups: int
    membership: list[tuple[int, ...]]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("partition", "multilabel"):
            raise ValueError(f"unknown grouping kind {self.kind!r}")
        if self.kind == "partition":
            for m in self.membership:
                if len(m) != 1 or not 0 <= m[0] < self.num_groups:
                    raise ValueError("partition requires exactly one group id per node")
        if not self.names:
            self.names = tuple(str(i) for i in range(self.num_groups))

    @classmethod
    def from_partition(cls, labels: Sequence[int], names: Sequence[str] = ()) -> "NodeGrouping":
        labels = [int(x) for x in labels]
        k = max(labels) + 1 if labels else 0
        return cls("partition", k, [(x,) for x in labels], tuple(names))

    @property
    def num_nodes(self) -> int:
        return len(self.membership)

    @property
    def group_sizes(self) -> np.ndarray:
        sizes = np.zeros(self.num_groups, dtype=np.int64)
        for m in self.membership:
            for g in m:
                sizes[g] += 1
        return sizes

    def members(self) -> list[np.ndarray]:
        """Node ids of each group C_l, ascending."""
        out: list[list[int]] = [[] for _ in range(self.num_groups)]
        for u, m in enumerate(self.membership):
            for g in m:
                out[g].append(u)
        return [np.asarray(x, dtype=np.int64) for x in out]

    def labels(self) -> np.ndarray:
        """Single group id per node; only defined for partitions."""
        if self.kind != "partition":
            raise ValueError("labels() requires a partition grouping")
        return np.fromiter((m[0] for m in self.membership), dtype=np.int64,
                           count=len(self.membership))

    def indicator(self) -> np.ndarray:
        """Boolean ``(N, L)`` membership matrix."""
        out = np.zeros((self.num_nodes, self.num_groups), dtype=bool)
        for u, m in enumerate(self.membership):
            out[u, list(m)] = True
        return out

    def permuted(self, perm: np.ndarray) -> "NodeGrouping":
        """Grouping for a relabeled graph where old node ``u`` becomes ``perm[u]``."""
        new = [()] * self.num_nodes
        for u, m in enumerate(self.membership):
            new[perm[u]] = m
        return NodeGrouping(self.kind, self.num_groups, new, self.names)


@dataclass(frozen=True)
class GraphStats:
    num_nodes: int
    num_edges: int
    density: float
    num_components: int

    def to_json(self) -> dict:
        return {"nodes": self.num_nodes, "edges": self.num_edges,
                "density": self.density, "components": self.num_components}


def _open_text(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def load_edge_list(source, delimiter: str | None = None) -> Graph:
    """Read a whitespace (or ``delimiter``) separated edge list.

    Lines starting with ``#`` and blank lines are skipped. Node tokens get dense
    ids in first-seen order.
    """
    index: dict[str, int] = {}
    ids: list[str] = []
    src: list[int] = []
    dst: list[int] = []
    with _open_text(source) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            toks = s.split(delimiter) if delimiter else s.split()
            if len(toks) != 2:
                raise ParseError(f"expected 2 tokens, got {len(toks)}", lineno)
            pair = []
            for tok in toks:
                tok = tok.strip()
                i = index.get(tok)
                if i is None:
                    i = index[tok] = len(ids)
                    ids.append(tok)
                pair.append(i)
            src.append(pair[0])
            dst.append(pair[1])
    edges = np.stack([np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)], axis=1)
    g = Graph.from_edges(edges, len(ids), ids)
    object.__setattr__(g, "_index", index)
    if g.dropped_self_loops:
        log.warning("dropped %d self-loop(s)", g.dropped_self_loops)
    return g


def write_edge_list(graph: Graph, dest) -> None:
    lines = [f"{graph.ids[u]} {graph.ids[v]}\n" for u, v in graph.edges()]
    if isinstance(dest, (str, Path)):
        Path(dest).write_text("".join(lines), encoding="utf-8")
    else:
        dest.write("".join(lines))


def load_labels(source, graph: Graph) -> NodeGrouping:
    """Read ``node<TAB>g1,g2,...`` lines into a multilabel grouping.

    Group tokens are mapped to dense group ids in first-seen order; the
    original tokens are kept in ``NodeGrouping.names``.
    """
    group_index: dict[str, int] = {}
    sets: list[set[int]] = [set() for _ in range(graph.num_nodes)]
    unknown: list[str] = []
    with _open_text(source) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.rstrip("\r\n")
            if not s.strip() or s.lstrip().startswith("#"):
                continue
            parts = s.split("\t") if "\t" in s else s.split(None, 1)
            if len(parts) != 2:
                raise ParseError("expected node<TAB>groups", lineno)
            node, groups = parts[0].strip(), [g.strip() for g in parts[1].split(",")]
            groups = [g for g in groups if g]
            if not groups:
                raise ParseError(f"empty group list for node {node!r}", lineno)
            if not graph.has_node(node):
                unknown.append(node)
                continue
            u = graph.index_of(node)
            for g in groups:
                gid = group_index.setdefault(g, len(group_index))
                sets[u].add(gid)
    if unknown:
        shown = ", ".join(unknown[:20]) + (" ..." if len(unknown) > 20 else "")
        raise DataError(f"{len(unknown)} unknown node id(s) in label file: {shown}")
    names = tuple(group_index)
    return NodeGrouping("multilabel", len(names), [tuple(sorted(s)) for s in sets], names)


def density(num_nodes: int, num_edges: int) -> float:
    if num_nodes < 2:
        return 0.0
    return 2.0 * num_edges / (num_nodes * (num_nodes - 1))


def graph_stats(graph: Graph) -> GraphStats:
    n = graph.num_nodes
    comps = connected_components(graph.to_scipy(), directed=False)[0] if n else 0
    return GraphStats(n, graph.num_edges, density(n, graph.num_edges), int(comps))


def sample_non_edges(graph: Graph, count: int, seed: int) -> list[tuple[int, int]]:
    """Uniformly sample ``count`` distinct unordered non-adjacent pairs ``(u, v)``, ``u < v``."""
    n = graph.num_nodes
    total = n * (n - 1) // 2 - graph.num_edges
    if count > total:
        raise DataError(f"requested {count} non-edges but only {total} exist")
    if count <= 0:
        return []
    rng = np.random.default_rng(seed)
    if count > total // 2:
        # dense regime: enumerate and choose without replacement
        pool = [(u, v) for u in range(n) for v in range(u + 1, n) if not graph.has_edge(u, v)]
        pick = rng.choice(len(pool), size=count, replace=False)
        return [pool[i] for i in pick]
    seen: set[tuple[int, int]] = set()
    out: list[tuple[int, int]] = []
    while len(out) < count:
        need = count - len(out)
        draws = rng.integers(0, n, size=(2 * need + 16, 2))
        for a, b in draws:
            if a == b:
                continue
            u, v = (int(a), int(b)) if a < b else (int(b), int(a))
            if (u, v) in seen or graph.has_edge(u, v):
                continue
            seen.add((u, v))
            out.append((u, v))
            if len(out) == count:
                break
    return out
