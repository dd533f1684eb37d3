"""Downstream tasks for node embeddings: pair classification, node classification, link prediction."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_softmax, softmax
from scipy.stats import rankdata

from .graph import DataError, Graph, NodeGrouping, sample_non_edges
from .sgns import TrainConfig, train
from .walks import WalkConfig, generate_walks

log = logging.getLogger(__name__)

PAIR_OPS = ("hadamard", "average", "concat", "abs_diff")
TASKS = ("group_binary", "group_multilabel", "community_binary", "community_multiclass",
         "link_prediction")


# ---------------------------------------------------------------- metrics

def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(random positive outranks random negative), ties counted as 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both positive and negative examples")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def micro_f1(predicted: Sequence, truth: Sequence) -> float:
    """Micro-averaged F1 over collections of label sets (or single labels)."""
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth lengths differ")
    if len(truth) == 0:
        raise ValueError("micro_f1 of empty input")
    tp = fp = fn = 0
    for p, t in zip(predicted, truth):
        p = _as_set(p)
        t = _as_set(t)
        hit = len(p & t)
        tp += hit
        fp += len(p) - hit
        fn += len(t) - hit
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 1.0


def _as_set(x) -> set:
    if isinstance(x, (set, frozenset, list, tuple, np.ndarray)):
        return set(np.asarray(x).ravel().tolist()) if isinstance(x, np.ndarray) else set(x)
    return {x}


def f1_binary(predicted: Sequence[int], truth: Sequence[int]) -> float:
    p = np.asarray(predicted).astype(bool)
    t = np.asarray(truth).astype(bool)
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------- pair data

@dataclass
class PairDataset:
    pairs: np.ndarray
    labels: np.ndarray
    feature_op: str = "hadamard"

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def _pair_label(memb: list[tuple[int, ...]], u: int, v: int) -> int:
    return int(bool(set(memb[u]) & set(memb[v])))


def build_pair_dataset(grouping: NodeGrouping, num_pairs: int, seed: int,
                       feature_op: str = "hadamard", exhaustive: bool = False) -> PairDataset:
    """Balanced same-group / different-group node pairs.

    Label 1 means the two nodes share a group. Nodes with no group are never
    sampled. ``exhaustive`` takes every pair of the rarer class and a seeded,
    equally large sample of the other.
    """
    rng = np.random.default_rng(seed)
    memb = grouping.membership
    nodes = np.asarray([u for u, m in enumerate(memb) if m], dtype=np.int64)
    if grouping.kind == "partition" and grouping.num_groups < 2:
        raise DataError("pair task needs at least two groups")
    if exhaustive:
        by_label: dict[int, list[tuple[int, int]]] = {0: [], 1: []}
        for a in range(nodes.size):
            for b in range(a + 1, nodes.size):
                u, v = int(nodes[a]), int(nodes[b])
                by_label[_pair_label(memb, u, v)].append((u, v))
        k = min(len(by_label[0]), len(by_label[1]))
        if k == 0:
            raise DataError("no pairs available for one of the classes")
        chosen = []
        for lab in (1, 0):
            pool = by_label[lab]
            idx = np.sort(rng.choice(len(pool), size=k, replace=False)) if len(pool) > k else range(k)
            chosen += [(*pool[i], lab) for i in idx]
        arr = np.asarray(chosen, dtype=np.int64)
        return PairDataset(arr[:, :2], arr[:, 2], feature_op)

    n_pos = num_pairs // 2
    need = {1: n_pos, 0: num_pairs - n_pos}
    if grouping.kind == "partition":
        sizes = grouping.group_sizes
        avail_pos = int((sizes * (sizes - 1) // 2).sum())
        avail = {1: avail_pos, 0: nodes.size * (nodes.size - 1) // 2 - avail_pos}
        for lab in (0, 1):
            if need[lab] > avail[lab]:
                raise DataError(f"only {avail[lab]} distinct pairs with label {lab}, need {need[lab]}")
    if nodes.size < 2:
        raise DataError("fewer than two grouped nodes")
    got: dict[int, list[tuple[int, int]]] = {0: [], 1: []}
    seen: set[tuple[int, int]] = set()
    attempts = 0
    budget = 2000 * num_pairs + 100000
    while len(got[0]) < need[0] or len(got[1]) < need[1]:
        draws = rng.integers(0, nodes.size, size=(4096, 2))
        for a, b in draws:
            attempts += 1
            if a == b:
                continue
            u, v = int(nodes[a]), int(nodes[b])
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                continue
            lab = _pair_label(memb, u, v)
            if len(got[lab]) >= need[lab]:
                continue
            seen.add((u, v))
            got[lab].append((u, v))
        if attempts > budget:
            raise DataError(f"could not sample enough pairs (have {len(got[1])} positive, "
                            f"{len(got[0])} negative)")
    pairs = np.asarray(got[1] + got[0], dtype=np.int64).reshape(-1, 2)
    labels = np.asarray([1] * need[1] + [0] * need[0], dtype=np.int64)
    return PairDataset(pairs, labels, feature_op)


def pair_features(u_vec: np.ndarray, v_vec: np.ndarray, op: str = "hadamard") -> np.ndarray:
    """Feature for one pair; for ``concat`` the caller passes the lower-id node first."""
    u = np.asarray(u_vec, dtype=np.float64)
    v = np.asarray(v_vec, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    if op == "hadamard":
        return u * v
    if op == "average":
        return (u + v) / 2.0
    if op == "concat":
        return np.concatenate([u, v], axis=-1)
    if op == "abs_diff":
        return np.abs(u - v)
    raise ValueError(f"unknown pair op {op!r}")


def pair_feature_matrix(vectors: np.ndarray, pairs: np.ndarray, op: str = "hadamard") -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return pair_features(vectors[lo], vectors[hi], op)


# ---------------------------------------------------------------- classifiers

@dataclass
class ClassifierConfig:
    l2: float = 1e-3
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0


@dataclass
class LinearModel:
    """Linear scorer on standardized features.

    ``weights`` is ``(F,)`` for a binary model and ``(C, F)`` for multiclass or
    one-vs-rest models; scores are ``x_std @ weights.T + bias``.
    """

    weights: np.ndarray
    bias: np.ndarray
    mode: str
    mean: np.ndarray
    scale: np.ndarray
    classes: np.ndarray | None = None

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.weights.T + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        s = self.decision_function(X)
        if self.mode == "binary":
            return (s >= 0).astype(np.int64)
        if self.mode == "multiclass":
            return self.classes[np.argmax(s, axis=1)]
        raise ValueError("use predict_top_r for one-vs-rest models")

    def predict_top_r(self, X: np.ndarray, r: Sequence[int]) -> list[tuple[int, ...]]:
        s = self.decision_function(X)
        order = np.argsort(-s, axis=1, kind="stable")
        return [tuple(sorted(order[i, :k].tolist())) for i, k in enumerate(r)]


def logistic_loss_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss plus ``l2/2 * |w|^2``; returns ``(loss, grad_w, grad_b)``."""
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (expit(z) - y) / X.shape[0]
    return float(loss), X.T @ r + l2 * w, float(r.sum())


def softmax_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy of ``softmax(X W^T + b)`` plus ``l2/2 * |W|^2``."""
    Z = X @ W.T + b
    logp = log_softmax(Z, axis=1)
    n = X.shape[0]
    loss = -np.mean(logp[np.arange(n), y]) + 0.5 * l2 * np.sum(W * W)
    R = softmax(Z, axis=1)
    R[np.arange(n), y] -= 1.0
    R /= n
    return float(loss), R.T @ X + l2 * W, R.sum(axis=0)


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return (X - mean) / scale, mean, scale


def _fit_logistic(Z, y, cfg: ClassifierConfig, rng):
    f = Z.shape[1]
    x0 = np.concatenate([rng.normal(0.0, 0.01, f), [0.0]])

    def fun(p):
        loss, gw, gb = logistic_loss_grad(p[:-1], p[-1], Z, y, cfg.l2)
        return loss, np.concatenate([gw, [gb]])

    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter, "gtol": cfg.tol})
    return res.x[:-1], res.x[-1]


def train_classifier(features: np.ndarray, labels, mode: str,
                     config: ClassifierConfig | None = None, num_classes: int | None = None) -> LinearModel:
    """Fit an L2-regularized linear classifier.

    ``mode`` is ``binary`` (labels 0/1), ``multiclass`` (integer labels,
    softmax) or ``one_vs_rest_multilabel`` (labels is a boolean ``(n, C)``
    indicator matrix).
    """
    cfg = config or ClassifierConfig()
    rng = np.random.default_rng(cfg.seed)
    X = np.asarray(features, dtype=np.float64)
    Z, mean, scale = _standardize(X)
    if mode == "binary":
        y = np.asarray(labels, dtype=np.float64)
        if np.unique(y).size < 2:
            raise DataError("binary classifier needs both classes in training data")
        w, b = _fit_logistic(Z, y, cfg, rng)
        return LinearModel(w, np.float64(b), mode, mean, scale, np.array([0, 1]))
    if mode == "multiclass":
        y_raw = np.asarray(labels, dtype=np.int64)
        classes, y = np.unique(y_raw, return_inverse=True)
        if classes.size < 2:
            raise DataError("multiclass classifier needs at least two classes")
        c, f = classes.size, Z.shape[1]
        x0 = np.concatenate([rng.normal(0.0, 0.01, c * f), np.zeros(c)])

        def fun(p):
            loss, gW, gb = softmax_loss_grad(p[:c * f].reshape(c, f), p[c * f:], Z, y, cfg.l2)
            return loss, np.concatenate([gW.ravel(), gb])

        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": cfg.max_iter, "gtol": cfg.tol})
        return LinearModel(res.x[:c * f].reshape(c, f), res.x[c * f:], mode, mean, scale, classes)
    if mode == "one_vs_rest_multilabel":
        Y = np.asarray(labels, dtype=bool)
        c = Y.shape[1]
        W = np.zeros((c, Z.shape[1]))
        b = np.zeros(c)
        for k in range(c):
            yk = Y[:, k].astype(np.float64)
            if yk.min() == yk.max():
                # class absent (or universal) in training data: constant score
                b[k] = 20.0 if yk[0] else -20.0
                continue
            W[k], b[k] = _fit_logistic(Z, yk, cfg, rng)
        return LinearModel(W, b, mode, mean, scale, np.arange(c))
    raise ValueError(f"unknown classifier mode {mode!r}")


def stratified_split(labels: Sequence[int], test_fraction: float, seed: int):
    """Per-class shuffled split; every class with >= 2 members contributes to both sides."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_fraction))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def random_split(n: int, test_fraction: float, seed: int):
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# ---------------------------------------------------------------- reports

@dataclass
class EvalReport:
    task: str
    metric: str
    value: float
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"metric value {self.value} outside [0, 1]")

    def to_json(self) -> dict:
        return {"task": self.task, "metric": self.metric, "value": self.value, "config": self.config}

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        return cls(d["task"], d["metric"], float(d["value"]), dict(d.get("config", {})))


def write_reports(reports: Sequence[EvalReport], json_path, csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task", "metric", "value", "dim", "seed"])
        for r in reports:
            w.writerow([r.task, r.metric, repr(r.value), r.config.get("dim"), r.config.get("seed")])


def read_reports(json_path) -> list[EvalReport]:
    with open(json_path, encoding="utf-8") as fh:
        return [EvalReport.from_json(d) for d in json.load(fh)]


# ---------------------------------------------------------------- tasks

@dataclass
class EvalConfig:
    tasks: tuple[str, ...] = TASKS
    pair_op: str = "hadamard"
    test_fraction: float = 0.2
    holdout_fraction: float = 0.2
    num_pairs: int = 10000
    seed: int = 0
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self):
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")
        if self.pair_op not in PAIR_OPS:
            raise ValueError(f"unknown pair op {self.pair_op!r}")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")


def pair_task(vectors: np.ndarray, grouping: NodeGrouping, cfg: EvalConfig, task: str) -> EvalReport:
    data = build_pair_dataset(grouping, cfg.num_pairs, cfg.seed, cfg.pair_op)
    X = pair_feature_matrix(vectors, data.pairs, cfg.pair_op)
    tr, te = stratified_split(data.labels, cfg.test_fraction, cfg.seed + 1)
    model = train_classifier(X[tr], data.labels[tr], "binary", cfg.classifier)
    value = f1_binary(model.predict(X[te]), data.labels[te])
    return EvalReport(task, "F1", value, _snapshot(vectors, cfg, pairs=len(data)))


def multiclass_task(vectors: np.ndarray, grouping: NodeGrouping, cfg: EvalConfig,
                    task: str = "community_multiclass") -> EvalReport:
    y = grouping.labels()
    tr, te = stratified_split(y, cfg.test_fraction, cfg.seed + 2)
    model = train_classifier(vectors[tr], y[tr], "multiclass", cfg.classifier)
    value = micro_f1(model.predict(vectors[te]).tolist(), y[te].tolist())
    return EvalReport(task, "micro-F1", value, _snapshot(vectors, cfg))


def multilabel_task(vectors: np.ndarray, grouping: NodeGrouping, cfg: EvalConfig,
                    task: str = "group_multilabel") -> EvalReport:
    """One-vs-rest logistic; each test node gets its r highest-scoring labels, r = its true count."""
    labeled = np.asarray([u for u, m in enumerate(grouping.membership) if m], dtype=np.int64)
    Y = grouping.indicator()[labeled]
    tr, te = random_split(labeled.size, cfg.test_fraction, cfg.seed + 3)
    model = train_classifier(vectors[labeled[tr]], Y[tr], "one_vs_rest_multilabel", cfg.classifier)
    truth = [grouping.membership[u] for u in labeled[te]]
    pred = model.predict_top_r(vectors[labeled[te]], [len(t) for t in truth])
    return EvalReport(task, "micro-F1", micro_f1(pred, truth), _snapshot(vectors, cfg))


def _snapshot(vectors, cfg: EvalConfig, **extra) -> dict:
    snap = {"dim": int(vectors.shape[1]), "seed": cfg.seed, "split": cfg.test_fraction,
            "feature_op": cfg.pair_op, "classifier": asdict(cfg.classifier)}
    snap.update(extra)
    return snap


def split_holdout_edges(graph: Graph, holdout_fraction: float, seed: int) -> tuple[np.ndarray, Graph]:
    """Pick held-out edges outside a random spanning forest, so no component is cut."""
    if not 0 < holdout_fraction < 0.5:
        raise ValueError("holdout_fraction must be in (0, 0.5)")
    edges = graph.edges()
    rng = np.random.default_rng(seed)
    edges = edges[rng.permutation(edges.shape[0])]
    parent = list(range(graph.num_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    removable = np.zeros(edges.shape[0], dtype=bool)
    for i, (u, v) in enumerate(edges):
        ru, rv = find(int(u)), find(int(v))
        if ru == rv:
            removable[i] = True
        else:
            parent[ru] = rv
    want = int(round(holdout_fraction * edges.shape[0]))
    candidates = edges[removable]
    if want < 1 or candidates.shape[0] < want:
        raise DataError(f"graph too small to hold out {want} edge(s) without disconnecting it")
    held = candidates[:want]
    return held, graph.subgraph_without(held)


def link_prediction_eval(graph: Graph, holdout_fraction: float, walk_config: WalkConfig,
                         train_config: TrainConfig, seed: int, pair_op: str = "hadamard",
                         classifier: ClassifierConfig | None = None) -> EvalReport:
    """Held-out edge AUC for embeddings retrained on the residual graph.

    Held-out edges and an equal number of non-edges form the test set; a
    disjoint set of non-edges plus residual edges trains the classifier.
    """
    held, residual = split_holdout_edges(graph, holdout_fraction, seed)
    h = held.shape[0]
    non_edges = np.asarray(sample_non_edges(graph, 2 * h, seed + 1), dtype=np.int64)
    test_neg, train_neg = non_edges[:h], non_edges[h:]
    rng = np.random.default_rng(seed + 2)
    res_edges = residual.edges()
    k = min(h, res_edges.shape[0])
    train_pos = res_edges[np.sort(rng.choice(res_edges.shape[0], size=k, replace=False))]
    train_neg = train_neg[:k]

    corpus = generate_walks(residual, walk_config)
    emb = train(corpus, train_config)
    vectors = emb.aligned(graph.ids).astype(np.float64)

    X_tr = pair_feature_matrix(vectors, np.concatenate([train_pos, train_neg]), pair_op)
    y_tr = np.concatenate([np.ones(k), np.zeros(k)])
    model = train_classifier(X_tr, y_tr, "binary", classifier or ClassifierConfig(seed=seed))
    X_te = pair_feature_matrix(vectors, np.concatenate([held, test_neg]), pair_op)
    y_te = np.concatenate([np.ones(h), np.zeros(h)])
    value = auc(model.decision_function(X_te), y_te)
    snap = {"dim": train_config.dim, "seed": seed, "holdout_fraction": holdout_fraction,
            "heldout_edges": int(h), "feature_op": pair_op,
            "walk": asdict(walk_config), "train": asdict(train_config)}
    return EvalReport("link_prediction", "AUC", value, snap)


def canonical_order(ids: Sequence[str]) -> np.ndarray:
    """perm[u] = position of node u when nodes are sorted by external id."""
    order = sorted(range(len(ids)), key=lambda u: ids[u])
    perm = np.empty(len(ids), dtype=np.int64)
    perm[order] = np.arange(len(ids))
    return perm


def run_task_suite(vectors: np.ndarray, graph: Graph, internal: NodeGrouping | None,
                   external: NodeGrouping | None, config: EvalConfig,
                   walk_config: WalkConfig | None = None,
                   train_config: TrainConfig | None = None) -> list[EvalReport]:
    """Every applicable evaluation cell: pair/multilabel on external groups,
    pair/multiclass on communities, and link prediction.

    ``vectors`` rows follow ``graph`` node ids. Work happens in external-id
    order so results do not depend on how the graph happened to be numbered.
    """
    perm = canonical_order(graph.ids)
    inv = np.argsort(perm)
    vec = np.asarray(vectors, dtype=np.float64)[inv]
    g = graph.relabeled(perm)
    internal = internal.permuted(perm) if internal is not None else None
    external = external.permuted(perm) if external is not None else None

    reports: list[EvalReport] = []
    for task in config.tasks:
        grouping = external if task.startswith("group_") else internal
        if task != "link_prediction" and grouping is None:
            log.info("skipping %s: grouping not supplied", task)
            continue
        if task in ("group_binary", "community_binary"):
            reports.append(pair_task(vec, grouping, config, task))
        elif task == "community_multiclass":
            reports.append(multiclass_task(vec, grouping, config))
        elif task == "group_multilabel":
            reports.append(multilabel_task(vec, grouping, config))
        elif task == "link_prediction":
            if walk_config is None:
                log.info("skipping link_prediction: no walk config supplied")
                continue
            tc = replace(train_config or TrainConfig(), dim=vec.shape[1])
            reports.append(link_prediction_eval(g, config.holdout_fraction, walk_config, tc,
                                                config.seed, config.pair_op,
                                                replace(config.classifier, seed=config.seed)))
    return reports
