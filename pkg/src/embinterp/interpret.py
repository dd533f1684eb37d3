"""Interpretability scores: overlap of node groups with the extremes of each embedding dimension."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import NodeGrouping

log = logging.getLogger(__name__)

_AGGS = {"max": np.max, "avg": np.mean}


@dataclass(frozen=True)
class ISConfig:
    """``k_mode='group_cardinality'`` uses k = |C_l| for each group."""

    k_mode: str = "group_cardinality"
    fixed_k: int = 10
    agg1: str = "max"
    agg2: str = "max"
    tie_rule: str = "lowest_id_first"

    def __post_init__(self):
        if self.k_mode not in ("group_cardinality", "fixed"):
            raise ValueError(f"unknown k_mode {self.k_mode!r}")
        if self.k_mode == "fixed" and self.fixed_k < 1:
            raise ValueError("fixed_k must be >= 1")
        for name in ("agg1", "agg2"):
            if getattr(self, name) not in _AGGS:
                raise ValueError(f"{name} must be 'max' or 'avg'")
        if self.tie_rule != "lowest_id_first":
            raise ValueError("only the lowest_id_first tie rule is supported")


@dataclass
class ISMatrix:
    """Top/bottom scores, shape ``(D, L')`` over the non-empty groups ``group_ids``."""

    top: np.ndarray
    bottom: np.ndarray
    group_ids: np.ndarray
    config: ISConfig
    per_dimension: np.ndarray | None = None
    per_group: np.ndarray | None = None
    skipped_groups: list[int] = field(default_factory=list)

    @property
    def combined(self) -> np.ndarray:
        return combine(self.top, self.bottom, self.config.agg2)

    def summary(self) -> dict:
        return {
            "per_dimension": None if self.per_dimension is None else self.per_dimension.tolist(),
            "per_group": None if self.per_group is None else
            {int(g): float(v) for g, v in zip(self.group_ids, self.per_group)},
            "skipped_groups": list(self.skipped_groups),
            "config": asdict(self.config),
        }


def rank_order(column: np.ndarray, descending: bool) -> np.ndarray:
    """Node ids sorted by value; equal values keep ascending node id."""
    column = np.asarray(column)
    ids = np.arange(column.shape[0])
    return np.lexsort((ids, -column if descending else column))


def top_k_nodes(embedding, d: int, k: int) -> np.ndarray:
    vectors = getattr(embedding, "vectors", embedding)
    _check_k(vectors, d, k)
    return np.sort(rank_order(vectors[:, d], descending=True)[:k])


def bottom_k_nodes(embedding, d: int, k: int) -> np.ndarray:
    vectors = getattr(embedding, "vectors", embedding)
    _check_k(vectors, d, k)
    return np.sort(rank_order(vectors[:, d], descending=False)[:k])


def _check_k(vectors, d, k):
    n, dim = vectors.shape
    if not 0 <= d < dim:
        raise IndexError(f"dimension {d} out of range 0..{dim - 1}")
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in 1..{n}")


def is_scores(embedding, grouping: NodeGrouping, config: ISConfig = ISConfig()) -> ISMatrix:
    """Percentage of each group that lands in the top-k / bottom-k of each dimension.

    ``embedding`` rows must be indexed by the same dense node ids as
    ``grouping``. Empty groups are dropped and listed in ``skipped_groups``.
    """
    vectors = np.asarray(getattr(embedding, "vectors", embedding))
    n, dim = vectors.shape
    if grouping.num_nodes != n:
        raise ValueError(f"grouping covers {grouping.num_nodes} nodes but embedding has {n} rows")
    members = grouping.members()
    keep = [g for g, m in enumerate(members) if m.size]
    skipped = [g for g, m in enumerate(members) if not m.size]
    if skipped:
        log.warning("skipping %d empty group(s)", len(skipped))
    if n and not keep:
        raise ValueError("grouping assigns no node to any group")
    idx = np.arange(n)
    top_rank = np.empty((dim, n), dtype=np.int64)
    bot_rank = np.empty((dim, n), dtype=np.int64)
    for d in range(dim):
        top_rank[d, rank_order(vectors[:, d], True)] = idx
        bot_rank[d, rank_order(vectors[:, d], False)] = idx
    top = np.zeros((dim, len(keep)))
    bottom = np.zeros((dim, len(keep)))
    for j, g in enumerate(keep):
        m = members[g]
        k = m.size if config.k_mode == "group_cardinality" else min(config.fixed_k, n)
        top[:, j] = (top_rank[:, m] < k).sum(axis=1) / m.size * 100.0
        bottom[:, j] = (bot_rank[:, m] < k).sum(axis=1) / m.size * 100.0
    return ISMatrix(top, bottom, np.asarray(keep, dtype=np.int64), config, skipped_groups=skipped)


def combine(top: np.ndarray, bottom: np.ndarray, agg2: str) -> np.ndarray:
    if agg2 == "max":
        return np.maximum(top, bottom)
    return (top + bottom) / 2.0


def aggregate(matrix: ISMatrix, config: ISConfig | None = None) -> ISMatrix:
    """Fill ``per_dimension`` (reduced over groups) and ``per_group`` (reduced over dimensions)."""
    config = config or matrix.config
    combined = combine(matrix.top, matrix.bottom, config.agg2)
    agg1 = _AGGS[config.agg1]
    if combined.size:
        per_dim = agg1(combined, axis=1)
        per_group = agg1(combined, axis=0)
    else:
        per_dim = np.zeros(combined.shape[0])
        per_group = np.zeros(combined.shape[1])
    return ISMatrix(matrix.top, matrix.bottom, matrix.group_ids, config, per_dim, per_group,
                    list(matrix.skipped_groups))


def interpretability(embedding, grouping: NodeGrouping, config: ISConfig = ISConfig()) -> ISMatrix:
    return aggregate(is_scores(embedding, grouping, config), config)


def export_is_heatmap(matrix: ISMatrix, dims: Sequence[int] | None = None,
                      group_names: Sequence[str] | None = None) -> bytes:
    """Long-format CSV ``dimension,group,direction,score`` for the selected dimensions."""
    n_dim = matrix.top.shape[0]
    dims = range(n_dim) if dims is None else list(dims)
    for d in dims:
        if not 0 <= d < n_dim:
            raise IndexError(f"dimension {d} out of range 0..{n_dim - 1}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dimension", "group", "direction", "score"])
    for d in dims:
        for j, g in enumerate(matrix.group_ids):
            name = group_names[g] if group_names is not None else int(g)
            w.writerow([d, name, "top", repr(float(matrix.top[d, j]))])
            w.writerow([d, name, "bottom", repr(float(matrix.bottom[d, j]))])
    return buf.getvalue().encode("utf-8")


def read_is_heatmap(data: bytes) -> dict[tuple[int, str, str], float]:
    rows = csv.DictReader(io.StringIO(data.decode("utf-8")))
    return {(int(r["dimension"]), r["group"], r["direction"]): float(r["score"]) for r in rows}


def write_is_outputs(matrix: ISMatrix, csv_path, json_path, group_names=None) -> None:
    with open(csv_path, "wb") as fh:
        fh.write(export_is_heatmap(matrix, None, group_names))
    summary = matrix.summary()
    if group_names is not None and summary["per_group"] is not None:
        summary["per_group"] = {group_names[g]: v for g, v in summary["per_group"].items()}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
