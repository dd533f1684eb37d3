"""Random-walk and transaction co-occurrence corpora."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numba
import numpy as np

from .graph import Graph, ParseError

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 80
    walk_length: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")


@dataclass(eq=False)
class WalkCorpus:
    """Walks stored flat: walk ``i`` is ``tokens[offsets[i]:offsets[i + 1]]``.

    Tokens are dense node ids; ``ids`` maps them back to external names.
    """

    tokens: np.ndarray
    offsets: np.ndarray
    ids: tuple[str, ...]

    @property
    def num_walks(self) -> int:
        return int(self.offsets.shape[0]) - 1

    @property
    def total_tokens(self) -> int:
        return int(self.tokens.shape[0])

    def __len__(self) -> int:
        return self.num_walks

    def __iter__(self) -> Iterator[np.ndarray]:
        for i in range(self.num_walks):
            yield self.tokens[self.offsets[i]:self.offsets[i + 1]]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.tokens[self.offsets[i]:self.offsets[i + 1]]

    @property
    def walks(self) -> list[list[int]]:
        return [w.tolist() for w in self]

    @classmethod
    def from_walks(cls, walks: Sequence[Sequence[int]], ids: Sequence[str] | None = None) -> "WalkCorpus":
        lengths = np.fromiter((len(w) for w in walks), dtype=np.int64, count=len(walks))
        offsets = np.zeros(len(walks) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        tokens = (np.concatenate([np.asarray(w, dtype=np.int32) for w in walks])
                  if len(walks) else np.zeros(0, dtype=np.int32))
        if ids is None:
            n = int(tokens.max()) + 1 if tokens.size else 0
            ids = [str(i) for i in range(n)]
        return cls(tokens.astype(np.int32), offsets, tuple(ids))

    def write(self, dest) -> None:
        """One walk per line, space-separated external ids."""
        names = np.asarray(self.ids, dtype=object)
        buf = io.StringIO()
        for w in self:
            buf.write(" ".join(names[w]))
            buf.write("\n")
        if isinstance(dest, (str, Path)):
            Path(dest).write_text(buf.getvalue(), encoding="utf-8")
        else:
            dest.write(buf.getvalue())

    @classmethod
    def read(cls, source, ids: Sequence[str] | None = None) -> "WalkCorpus":
        """Parse a corpus file. Unknown names get fresh ids in first-seen order."""
        index = {name: i for i, name in enumerate(ids or ())}
        names = list(ids or ())
        walks = []
        text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
        for line in text.splitlines():
            toks = line.split()
            if not toks:
                continue
            walk = []
            for t in toks:
                i = index.get(t)
                if i is None:
                    i = index[t] = len(names)
                    names.append(t)
                walk.append(i)
            walks.append(walk)
        return cls.from_walks(walks, names)


@numba.njit(cache=True, inline="always")
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _xorshift(s):
    s ^= (s << np.uint64(13)) & _MASK64
    s ^= s >> np.uint64(7)
    s ^= (s << np.uint64(17)) & _MASK64
    return s


@numba.njit(cache=True)
def walk_seed(seed, node, walk_index):
    """64-bit RNG state for one walk; a pure function of its three inputs."""
    s = _splitmix64(np.uint64(seed) & _MASK64)
    s = _splitmix64(s ^ np.uint64(node))
    s = _splitmix64(s ^ np.uint64(walk_index))
    if s == np.uint64(0):
        s = np.uint64(0x2545F4914F6CDD1D)
    return s


@numba.njit(cache=True, parallel=True)
def _walk_kernel(indptr, indices, n, gamma, length, seed, out, lengths):
    total = n * gamma
    for w in numba.prange(total):
        r = w // n
        start = w - r * n
        s = walk_seed(seed, start, r)
        base = w * length
        cur = start
        out[base] = cur
        k = 1
        while k < length:
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            s = _xorshift(s)
            j = np.int64((s >> np.uint64(11)) % np.uint64(deg))
            cur = indices[lo + j]
            out[base + k] = cur
            k += 1
        lengths[w] = k


def generate_walks(graph: Graph, config: WalkConfig, workers: int = 1) -> WalkCorpus:
    """Uniform random walks, ``walks_per_node`` rounds over all nodes in id order.

    Walk ``r * N + u`` starts at node ``u`` in round ``r``; its randomness is
    seeded from ``(seed, u, r)`` alone, so output does not depend on ``workers``.
    """
    n = graph.num_nodes
    if n == 0:
        raise ValueError("cannot generate walks on an empty graph")
    gamma, length = config.walks_per_node, config.walk_length
    out = np.empty(n * gamma * length, dtype=np.int32)
    lengths = np.empty(n * gamma, dtype=np.int64)
    prev = numba.get_num_threads()
    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
    try:
        _walk_kernel(graph.indptr, graph.indices, n, gamma, length,
                     np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF), out, lengths)
    finally:
        numba.set_num_threads(prev)
    offsets = np.zeros(n * gamma + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    if offsets[-1] == out.shape[0]:
        tokens = out
    else:
        keep = np.arange(length)[None, :] < lengths[:, None]
        tokens = out.reshape(-1, length)[keep]
    return WalkCorpus(tokens, offsets, graph.ids)


@dataclass
class TransactionLog:
    accounts: list[str]
    items: list[str]
    timestamps: np.ndarray

    def __len__(self) -> int:
        return len(self.accounts)

    @classmethod
    def read_csv(cls, source) -> "TransactionLog":
        """CSV with header ``account,item,timestamp`` (integer seconds)."""
        fh = open(source, newline="", encoding="utf-8") if isinstance(source, (str, Path)) else source
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return cls([], [], np.zeros(0, dtype=np.int64))
            if [h.strip() for h in header] != ["account", "item", "timestamp"]:
                raise ParseError("header must be account,item,timestamp", 1)
            accts, items, ts = [], [], []
            for lineno, row in enumerate(reader, 2):
                if not row:
                    continue
                if len(row) != 3:
                    raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
                try:
                    t = int(row[2])
                except ValueError:
                    raise ParseError(f"bad timestamp {row[2]!r}", lineno) from None
                accts.append(row[0].strip())
                items.append(row[1].strip())
                ts.append(t)
        finally:
            if isinstance(source, (str, Path)):
                fh.close()
        return cls(accts, items, np.asarray(ts, dtype=np.int64))


def generate_cooccurrence_pairs(log: TransactionLog, window_seconds: int,
                                dedup: bool = False) -> tuple[WalkCorpus, Graph]:
    """Length-2 walks for every same-account transaction pair within the window.

    Each qualifying pair with distinct items emits ``[a, b]`` and ``[b, a]``;
    ``|dt| <= window_seconds`` counts as inside. Items get dense ids in
    first-seen order among emitted pairs. With ``dedup`` an account emits a
    given item pair at most once.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    by_account: dict[str, list[int]] = {}
    for i, a in enumerate(log.accounts):
        by_account.setdefault(a, []).append(i)
    index: dict[str, int] = {}
    names: list[str] = []

    def node(item: str) -> int:
        j = index.get(item)
        if j is None:
            j = index[item] = len(names)
            names.append(item)
        return j

    walks: list[tuple[int, int]] = []
    ts = log.timestamps
    for acct in by_account:
        rows = sorted(by_account[acct], key=lambda i: (ts[i], i))
        seen: set[tuple[str, str]] = set()
        for a_pos, i in enumerate(rows):
            for j in rows[a_pos + 1:]:
                if ts[j] - ts[i] > window_seconds:
                    break
                x, y = log.items[i], log.items[j]
                if x == y:
                    continue
                if dedup:
                    key = (x, y) if x < y else (y, x)
                    if key in seen:
                        continue
                    seen.add(key)
                u, v = node(x), node(y)
                walks.append((u, v))
                walks.append((v, u))
    corpus = WalkCorpus.from_walks(walks, names)
    graph = Graph.from_edges(np.asarray(walks, dtype=np.int64).reshape(-1, 2), len(names), names)
    return corpus, graph
