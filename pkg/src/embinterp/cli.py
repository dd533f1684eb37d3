"""Command-line front end: ``embinterp <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .evaluate import TASKS, ClassifierConfig, EvalConfig, run_task_suite, write_reports
from .graph import DataError, ParseError, graph_stats, load_edge_list, load_labels, write_edge_list
from .interpret import ISConfig, export_is_heatmap, interpretability, write_is_outputs
from .louvain import louvain, read_assignment, write_assignment
from .pipeline import StageError, compare_runs, load_config, run_pipeline
from .sgns import EmbeddingMatrix, TrainConfig, train
from .walks import TransactionLog, WalkConfig, WalkCorpus, generate_cooccurrence_pairs, generate_walks

EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 1, 2, 3

STATS_EPILOG = """\
Density is 2E / (N(N-1)). Dataset note: for Flickr (80,513 nodes, 5,899,882
edges) this gives 1.82e-3; the value 1.18e-3 that circulates for this
dataset does not follow from its own node and edge counts (likely a digit
transposition). This command always reports the computed value.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


S = argparse.SUPPRESS


def _add_walk_flags(p):
    g = p.add_argument_group("walks")
    g.add_argument("--walks-per-node", type=int, default=S)
    g.add_argument("--walk-length", type=int, default=S)
    g.add_argument("--window-seconds", type=int, default=S,
                   help="co-occurrence window for transaction logs (inclusive)")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--dim", type=int, default=S)
    g.add_argument("--window", type=int, default=S)
    g.add_argument("--negatives", type=int, default=S)
    g.add_argument("--epochs", type=int, default=S)
    g.add_argument("--initial-learning-rate", type=float, default=S)
    g.add_argument("--min-learning-rate", type=float, default=S)
    g.add_argument("--unigram-exponent", type=float, default=S)
    g.add_argument("--subsample-threshold", type=float, default=S)
    g.add_argument("--no-shrink-window", dest="shrink_window", action="store_false", default=S)
    g.add_argument("--workers", type=int, default=S)


def _add_is_flags(p):
    g = p.add_argument_group("interpretability")
    g.add_argument("--k-mode", choices=["group_cardinality", "fixed"], default=S)
    g.add_argument("--fixed-k", type=int, default=S)
    g.add_argument("--agg1", choices=["max", "avg"], default=S)
    g.add_argument("--agg2", choices=["max", "avg"], default=S)
    g.add_argument("--dims", type=_int_list, default=S,
                   help="comma-separated dimensions (interpret: heatmap selection; pipeline: dimension sweep)")


def _add_eval_flags(p):
    g = p.add_argument_group("evaluation")
    g.add_argument("--tasks", type=_str_list, default=S, help=f"comma-separated subset of {','.join(TASKS)}")
    g.add_argument("--pair-op", choices=["hadamard", "average", "concat", "abs_diff"], default=S)
    g.add_argument("--split", type=float, default=S, help="test fraction of the stratified split")
    g.add_argument("--holdout-fraction", type=float, default=S)
    g.add_argument("--pairs", type=int, default=S)


def _int_list(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _str_list(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _pick(args, names):
    return {n: getattr(args, n) for n in names if hasattr(args, n)}


_TRAIN_FIELDS = ("dim", "window", "negatives", "epochs", "initial_learning_rate", "min_learning_rate",
                 "unigram_exponent", "subsample_threshold", "shrink_window", "workers")
_IS_FIELDS = ("k_mode", "fixed_k", "agg1", "agg2")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="embinterp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="node/edge counts, density, components as JSON",
                       epilog=STATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("edges")
    s.add_argument("--delimiter", default=None)

    s = sub.add_parser("walk", help="write a walk corpus")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--edges")
    src.add_argument("--transactions", help="CSV with header account,item,timestamp")
    s.add_argument("--delimiter", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--graph-out", help="write the co-occurrence graph (transactions mode)")
    s.add_argument("--dedup-pairs", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    _add_walk_flags(s)

    s = sub.add_parser("train", help="train SGNS embeddings from a corpus file")
    s.add_argument("corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    _add_train_flags(s)

    s = sub.add_parser("communities", help="Louvain communities")
    s.add_argument("edges")
    s.add_argument("--delimiter", default=None)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--resolution", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("interpret", help="interpretability scores of an embedding")
    s.add_argument("embedding")
    s.add_argument("edges")
    s.add_argument("--delimiter", default=None)
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--communities", help="node,community CSV")
    grp.add_argument("--labels", help="node<TAB>groups file")
    s.add_argument("--out-dir", required=True)
    _add_is_flags(s)

    s = sub.add_parser("evaluate", help="downstream task reports")
    s.add_argument("embedding")
    s.add_argument("edges")
    s.add_argument("--delimiter", default=None)
    s.add_argument("--communities")
    s.add_argument("--labels")
    s.add_argument("--out", required=True, help="report path prefix (.json and .csv are written)")
    s.add_argument("--seed", type=int, default=0)
    _add_eval_flags(s)
    _add_walk_flags(s)
    _add_train_flags(s)

    s = sub.add_parser("pipeline", help="full run from a TOML/JSON config; flags override config")
    s.add_argument("config")
    s.add_argument("--out-dir", default=S)
    s.add_argument("--seed", type=int, default=S)
    _add_walk_flags(s)
    _add_train_flags(s)
    _add_is_flags(s)
    _add_eval_flags(s)

    s = sub.add_parser("compare", help="long-format comparison CSV across run directories")
    s.add_argument("runs", nargs="+")
    s.add_argument("--out", help="write CSV here instead of stdout")
    return p


def _walk_config(args, seed):
    return WalkConfig(**_pick(args, ("walks_per_node", "walk_length")), seed=seed)


def cmd_stats(args):
    g = load_edge_list(args.edges, args.delimiter)
    print(json.dumps(graph_stats(g).to_json()))


def cmd_walk(args):
    if args.transactions:
        log = TransactionLog.read_csv(args.transactions)
        corpus, graph = generate_cooccurrence_pairs(log, getattr(args, "window_seconds", 3600), args.dedup_pairs)
        if args.graph_out:
            write_edge_list(graph, args.graph_out)
    else:
        graph = load_edge_list(args.edges, args.delimiter)
        corpus = generate_walks(graph, _walk_config(args, args.seed), args.workers)
    corpus.write(args.out)


def cmd_train(args):
    corpus = WalkCorpus.read(args.corpus)
    emb = train(corpus, TrainConfig(**_pick(args, _TRAIN_FIELDS), seed=args.seed))
    emb.save(args.out)


def cmd_communities(args):
    g = load_edge_list(args.edges, args.delimiter)
    a = louvain(g, args.resolution, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_assignment(g, a, out / "communities.csv")
    (out / "communities.json").write_text(json.dumps(a.summary(), indent=2, sort_keys=True), encoding="utf-8")


def cmd_interpret(args):
    g = load_edge_list(args.edges, args.delimiter)
    if args.communities:
        grouping, names = read_assignment(args.communities, g), None
    else:
        grouping = load_labels(args.labels, g)
        names = grouping.names
    vectors = EmbeddingMatrix.load(args.embedding).aligned(g.ids)
    m = interpretability(vectors, grouping, ISConfig(**_pick(args, _IS_FIELDS)))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_is_outputs(m, out / "is_full.csv", out / "is_summary.json", names)
    if hasattr(args, "dims"):
        (out / "is_heatmap.csv").write_bytes(export_is_heatmap(m, args.dims, names))


def cmd_evaluate(args):
    g = load_edge_list(args.edges, args.delimiter)
    internal = read_assignment(args.communities, g) if args.communities else None
    external = load_labels(args.labels, g) if args.labels else None
    vectors = EmbeddingMatrix.load(args.embedding).aligned(g.ids)
    ev = _pick(args, ("tasks", "pair_op", "holdout_fraction"))
    if hasattr(args, "split"):
        ev["test_fraction"] = args.split
    if hasattr(args, "pairs"):
        ev["num_pairs"] = args.pairs
    cfg = EvalConfig(**ev, seed=args.seed, classifier=ClassifierConfig(seed=args.seed))
    tc = TrainConfig(**_pick(args, _TRAIN_FIELDS), seed=args.seed)
    reports = run_task_suite(vectors, g, internal, external, cfg, _walk_config(args, args.seed), tc)
    write_reports(reports, args.out + ".json", args.out + ".csv")
    for r in reports:
        print(f"{r.task}\t{r.metric}\t{r.value:.4f}")


def apply_overrides(cfg, args):
    walk = _pick(args, ("walks_per_node", "walk_length"))
    tr = _pick(args, _TRAIN_FIELDS)
    isc = _pick(args, _IS_FIELDS)
    ev = _pick(args, ("tasks", "pair_op", "split", "holdout_fraction", "pairs"))
    top = {}
    if hasattr(args, "out_dir"):
        top["output_dir"] = args.out_dir
    if hasattr(args, "seed"):
        top["seed"] = args.seed
    if hasattr(args, "window_seconds"):
        top["window_seconds"] = args.window_seconds
    if hasattr(args, "dims"):
        top["dims"] = args.dims
    return replace(cfg, walk=replace(cfg.walk, **walk), train=replace(cfg.train, **tr),
                   interpret=replace(cfg.interpret, **isc), evaluate=replace(cfg.evaluate, **ev), **top)


def cmd_pipeline(args):
    cfg = apply_overrides(load_config(args.config), args)
    out = run_pipeline(cfg)
    print(out)


def cmd_compare(args):
    text = compare_runs(args.runs)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


COMMANDS = {"stats": cmd_stats, "walk": cmd_walk, "train": cmd_train, "communities": cmd_communities,
            "interpret": cmd_interpret, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
            "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, (DataError, ParseError)) else EXIT_STAGE
    except (DataError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
