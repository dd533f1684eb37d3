"""Convert the BlogCatalog csv layout (edges.csv, group-edges.csv) to edges.txt + labels.tsv."""

import argparse
from pathlib import Path

from embinterp.datasets import convert_asu


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("src", type=Path, help="directory with edges.csv and group-edges.csv")
    p.add_argument("dst", type=Path)
    args = p.parse_args()
    edges, labels = convert_asu(args.src, args.dst)
    print(edges)
    print(labels)


if __name__ == "__main__":
    main()
