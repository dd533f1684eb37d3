"""Dimension sweep over several seeds; prints the median of every evaluation cell.

    python scripts/run_sweep.py configs/blogcatalog.toml --seeds 0 1 2
"""

import argparse
import statistics
from dataclasses import replace
from pathlib import Path

from embinterp.evaluate import read_reports
from embinterp.pipeline import load_config, run_pipeline


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out-dir", default=None, help="parent directory for per-seed runs")
    args = p.parse_args()

    base = load_config(args.config)
    root = Path(args.out_dir or base.output_dir)
    cells = {}
    for seed in args.seeds:
        out = run_pipeline(replace(base, seed=seed, output_dir=str(root / f"seed{seed}")))
        print(f"seed {seed}: {out}")
        for d in base.dims:
            for r in read_reports(out / f"dim_{d}" / "reports.json"):
                cells.setdefault((r.task, r.metric, d), []).append(r.value)

    print(f"\n{'task':24s} {'metric':10s} {'D':>4s} {'median':>8s} {'min':>8s} {'max':>8s}")
    for (task, metric, d), vals in sorted(cells.items()):
        print(f"{task:24s} {metric:10s} {d:4d} {statistics.median(vals):8.4f} {min(vals):8.4f} {max(vals):8.4f}")


if __name__ == "__main__":
    main()
