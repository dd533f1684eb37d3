"""Locating and converting the social-network benchmark in its distributed layout.

The distributed layout is a directory with ``edges.csv`` (``u,v`` per line) and
``group-edges.csv`` (``node,group`` per line). Conversion produces the
toolkit's own formats: a whitespace edge list and ``node<TAB>g1,g2`` labels.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from pathlib import Path

from .graph import ParseError

DATA_ENV = "BLOGCATALOG_DIR"
DEFAULT_DIRS = ("data/BlogCatalog-dataset/data", "data/blogcatalog")


def find_blogcatalog(root: Path | None = None) -> Path | None:
    """Directory holding the raw or converted files, or None if absent."""
    root = Path(root) if root is not None else Path.cwd()
    candidates = [Path(os.environ[DATA_ENV])] if os.environ.get(DATA_ENV) else []
    candidates += [root / d for d in DEFAULT_DIRS]
    for c in candidates:
        if (c / "edges.csv").is_file() or (c / "edges.txt").is_file():
            return c
    return None


def convert_asu(src: Path, dst: Path) -> tuple[Path, Path]:
    """Write ``edges.txt`` and ``labels.tsv`` from an ``edges.csv``/``group-edges.csv`` directory."""
    src, dst = Path(src), Path(dst)
    if (src / "edges.txt").is_file() and (src / "labels.tsv").is_file():
        return src / "edges.txt", src / "labels.tsv"
    dst.mkdir(parents=True, exist_ok=True)
    edges_out, labels_out = dst / "edges.txt", dst / "labels.tsv"
    with open(src / "edges.csv", newline="") as fh, open(edges_out, "w") as out:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError("expected u,v", lineno)
            out.write(f"{row[0].strip()} {row[1].strip()}\n")
    groups: dict[str, list[str]] = defaultdict(list)
    with open(src / "group-edges.csv", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError("expected node,group", lineno)
            groups[row[0].strip()].append(row[1].strip())
    with open(labels_out, "w") as out:
        for node in sorted(groups, key=lambda s: (len(s), s)):
            out.write(f"{node}\t{','.join(dict.fromkeys(groups[node]))}\n")
    return edges_out, labels_out
