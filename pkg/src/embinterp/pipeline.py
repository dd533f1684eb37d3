"""Run configuration, stage orchestration and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .evaluate import ClassifierConfig, EvalConfig, EvalReport, read_reports, run_task_suite, write_reports
from .graph import DataError, Graph, NodeGrouping, graph_stats, load_edge_list, load_labels, write_edge_list
from .interpret import ISConfig, interpretability, write_is_outputs
from .louvain import louvain, read_assignment, write_assignment
from .sgns import EmbeddingMatrix, TrainConfig, train
from .walks import TransactionLog, WalkConfig, WalkCorpus, generate_cooccurrence_pairs, generate_walks

log = logging.getLogger(__name__)

STAGES = ("walk", "train", "communities", "interpret", "evaluate")
OUTPUT_DIR_ENV = "EMBINTERP_OUTPUT_DIR"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class LouvainConfig:
    resolution: float = 1.0


@dataclass
class EvalSettings:
    tasks: tuple[str, ...] = EvalConfig.tasks
    pair_op: str = "hadamard"
    split: float = 0.2
    holdout_fraction: float = 0.2
    pairs: int = 10000
    l2: float = 1e-3
    max_iter: int = 500


@dataclass
class RunConfig:
    edges: str | None = None
    labels: str | None = None
    transactions: str | None = None
    delimiter: str | None = None
    window_seconds: int = 3600
    dedup_pairs: bool = False
    stages: tuple[str, ...] = STAGES
    dims: tuple[int, ...] = (128,)
    seed: int = 0
    output_dir: str = "runs/default"
    walk: WalkConfig = field(default_factory=WalkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    louvain: LouvainConfig = field(default_factory=LouvainConfig)
    interpret: ISConfig = field(default_factory=ISConfig)
    evaluate: EvalSettings = field(default_factory=EvalSettings)

    def validate(self) -> None:
        if (self.edges is None) == (self.transactions is None):
            raise DataError("config needs exactly one of 'edges' or 'transactions'")
        for name in ("edges", "labels", "transactions"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise DataError(f"{name} file not found: {p}")
        for s in self.stages:
            if s not in STAGES:
                raise DataError(f"unknown stage {s!r}")
        if not self.dims:
            raise DataError("dims must list at least one dimension")
        needs_train = {"interpret", "evaluate"} & set(self.stages)
        if needs_train and "train" not in self.stages:
            out = Path(self.output_dir)
            missing = [d for d in self.dims if not (out / f"dim_{d}" / "embedding.txt").is_file()]
            if missing:
                raise DataError(f"stages {sorted(needs_train)} need an embedding for dims {missing}; "
                                "include 'train' or run it first")

    def snapshot(self) -> dict:
        return _jsonable(asdict(self))


_SECTIONS = {"walk": WalkConfig, "train": TrainConfig, "louvain": LouvainConfig,
             "interpret": ISConfig, "evaluate": EvalSettings}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _coerce(cls, data: dict):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise DataError(f"unknown {cls.__name__} field(s): {sorted(unknown)}")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**vals)


def config_from_dict(data: dict, base_dir: Path | None = None) -> RunConfig:
    data = dict(data)
    sections = {k: _coerce(cls, data.pop(k)) for k, cls in _SECTIONS.items() if k in data}
    cfg = _coerce(RunConfig, {**data, **sections})
    if base_dir is not None:
        for name in ("edges", "labels", "transactions"):
            p = getattr(cfg, name)
            if p is not None and not Path(p).is_absolute():
                setattr(cfg, name, str(base_dir / p))
    return cfg


def load_config(path) -> RunConfig:
    """Read a TOML (``.toml``) or JSON run config; relative paths resolve from its directory."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return config_from_dict(data, path.parent.resolve())


def derive_seed(global_seed: int, label: str) -> int:
    """Stage seed from the run seed by labeled hashing."""
    digest = hashlib.sha256(f"{global_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def stage_seeds(seed: int) -> dict[str, int]:
    return {s: derive_seed(seed, s) for s in ("walk", "train", "louvain", "evaluate")}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    version: str = __version__
    status: str = "running"
    failed_stage: str | None = None

    def write(self, out_dir: Path) -> None:
        atomic_write_text(out_dir / "manifest.json", json.dumps(asdict(self), indent=2, sort_keys=True))

    @classmethod
    def read(cls, out_dir) -> "RunManifest":
        with open(Path(out_dir) / "manifest.json", encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def verify(self, out_dir) -> list[str]:
        """Relative paths whose current hash differs from the recorded one."""
        out_dir = Path(out_dir)
        bad = []
        for rel, digest in self.artifacts.items():
            p = out_dir / rel
            if not p.is_file() or sha256_file(p) != digest:
                bad.append(rel)
        return bad


def _resolved(cfg: RunConfig) -> RunConfig:
    """Apply the env output override and the derived per-stage seeds."""
    out = os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir
    seeds = stage_seeds(cfg.seed)
    return replace(cfg, output_dir=out,
                   walk=replace(cfg.walk, seed=seeds["walk"]),
                   train=replace(cfg.train, seed=seeds["train"]))


def load_inputs(cfg: RunConfig) -> tuple[Graph, WalkCorpus | None, NodeGrouping | None]:
    corpus = None
    if cfg.transactions is not None:
        corpus, graph = generate_cooccurrence_pairs(TransactionLog.read_csv(cfg.transactions),
                                                    cfg.window_seconds, cfg.dedup_pairs)
    else:
        graph = load_edge_list(cfg.edges, cfg.delimiter)
    labels = load_labels(cfg.labels, graph) if cfg.labels else None
    return graph, corpus, labels


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.manifest = RunManifest(cfg.snapshot())

    def stage(self, name: str, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
        except Exception as exc:
            self.manifest.status = "failed"
            self.manifest.failed_stage = name
            self._finish()
            raise StageError(name, exc) from exc
        self.manifest.stage_seconds[name] = self.manifest.stage_seconds.get(name, 0.0) + time.perf_counter() - t0
        return result

    def record(self, *paths: Path) -> None:
        for p in paths:
            self.manifest.artifacts[str(p.relative_to(self.out))] = sha256_file(p)

    def _finish(self) -> None:
        self.manifest.artifacts = dict(sorted(self.manifest.artifacts.items()))
        self.manifest.write(self.out)


def run_pipeline(config: RunConfig) -> Path:
    """Walk, train, detect communities, score interpretability and evaluate, per dimension.

    Returns the run directory. Completed artifacts stay on disk if a later stage fails.
    """
    cfg = _resolved(config)
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(cfg)
    for name in ("edges", "labels", "transactions"):
        p = getattr(cfg, name)
        if p is not None:
            run.manifest.inputs[name] = sha256_file(p)
    graph, corpus, labels = run.stage("load", load_inputs, cfg)
    stages = set(cfg.stages)
    seeds = stage_seeds(cfg.seed)

    stats_path = out / "graph_stats.json"
    stats_path.write_text(json.dumps(graph_stats(graph).to_json(), indent=2, sort_keys=True), encoding="utf-8")
    run.record(stats_path)
    if cfg.transactions is not None:
        gpath = out / "graph.edges.txt"
        write_edge_list(graph, gpath)
        run.record(gpath)

    corpus_path = out / "corpus.txt"
    if "walk" in stages:
        if corpus is None:
            corpus = run.stage("walk", generate_walks, graph, cfg.walk, cfg.train.workers)
        run.stage("walk", corpus.write, corpus_path)
        run.record(corpus_path)
    elif "train" in stages:
        corpus = run.stage("walk", WalkCorpus.read, corpus_path, graph.ids)

    communities = None
    comm_path = out / "communities.csv"
    if "communities" in stages:
        assignment = run.stage("communities", louvain, graph, cfg.louvain.resolution, seeds["louvain"])
        write_assignment(graph, assignment, comm_path)
        summary_path = out / "communities.json"
        summary_path.write_text(json.dumps(assignment.summary(), indent=2, sort_keys=True), encoding="utf-8")
        run.record(comm_path, summary_path)
        communities = assignment.grouping()
    elif comm_path.is_file():
        communities = read_assignment(comm_path, graph)

    ev = cfg.evaluate
    eval_cfg = EvalConfig(tuple(ev.tasks), ev.pair_op, ev.split, ev.holdout_fraction, ev.pairs,
                          seeds["evaluate"], ClassifierConfig(ev.l2, ev.max_iter, seed=seeds["evaluate"]))
    for dim in cfg.dims:
        ddir = out / f"dim_{dim}"
        if {"train", "interpret", "evaluate"} & stages:
            ddir.mkdir(exist_ok=True)
        emb_path = ddir / "embedding.txt"
        tc = replace(cfg.train, dim=dim)
        if "train" in stages:
            emb = run.stage("train", train, corpus, tc)
            sidecar = emb.save(emb_path)
            run.record(emb_path, sidecar)
        elif {"interpret", "evaluate"} & stages:
            emb = EmbeddingMatrix.load(emb_path)
        else:
            continue
        vectors = emb.aligned(graph.ids)

        if "interpret" in stages:
            for tag, grouping, names in (("communities", communities, None),
                                         ("labels", labels, labels.names if labels else None)):
                if grouping is None:
                    continue
                m = run.stage("interpret", interpretability, vectors, grouping, cfg.interpret)
                csv_path, json_path = ddir / f"is_{tag}.csv", ddir / f"is_{tag}.json"
                write_is_outputs(m, csv_path, json_path, names)
                run.record(csv_path, json_path)

        if "evaluate" in stages:
            reports = run.stage("evaluate", run_task_suite, vectors, graph, communities, labels,
                                eval_cfg, cfg.walk, tc)
            rj, rc = ddir / "reports.json", ddir / "reports.csv"
            write_reports(reports, rj, rc)
            run.record(rj, rc)

    config_path = out / "config.json"
    config_path.write_text(json.dumps(cfg.snapshot(), indent=2, sort_keys=True), encoding="utf-8")
    run.record(config_path)
    run.manifest.status = "complete"
    run._finish()
    return out


def run_reports(run_dir) -> dict[int, list[EvalReport]]:
    """Reports of a run keyed by embedding dimension, as listed in its manifest."""
    run_dir = Path(run_dir)
    manifest = RunManifest.read(run_dir)
    out: dict[int, list[EvalReport]] = {}
    for rel in manifest.artifacts:
        parts = Path(rel).parts
        if len(parts) == 2 and parts[0].startswith("dim_") and parts[1] == "reports.json":
            out[int(parts[0][4:])] = read_reports(run_dir / rel)
    return dict(sorted(out.items()))


def compare_runs(run_dirs: Sequence) -> str:
    """Long-format CSV ``run,dim,task,metric,value,delta`` across runs.

    ``delta`` is relative to the first run's value for the same task (and the
    same dimension when the first run has it).
    """
    if len(run_dirs) < 2:
        raise DataError("compare needs at least two runs")
    runs = [(str(d), run_reports(d)) for d in run_dirs]
    task_sets = [{r.task for reps in by_dim.values() for r in reps} for _, by_dim in runs]
    common = set.intersection(*task_sets)
    if not common:
        raise DataError("runs share no evaluated task")
    first = runs[0][1]
    base: dict[tuple[int | None, str], float] = {}
    for dim, reps in first.items():
        for r in reps:
            base[(dim, r.task)] = r.value
            base.setdefault((None, r.task), r.value)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "dim", "task", "metric", "value", "delta"])
    for name, by_dim in runs:
        for dim, reps in by_dim.items():
            for r in reps:
                if r.task not in common:
                    continue
                ref = base.get((dim, r.task), base.get((None, r.task)))
                w.writerow([name, dim, r.task, r.metric, repr(r.value), repr(r.value - ref)])
    return buf.getvalue()
