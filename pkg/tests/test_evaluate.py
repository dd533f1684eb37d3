import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import connected_components

from embinterp.evaluate import (ClassifierConfig, EvalConfig, auc, build_pair_dataset, f1_binary,
                                link_prediction_eval, logistic_loss_grad, micro_f1, pair_features,
                                run_task_suite, softmax_loss_grad, split_holdout_edges, stratified_split,
                                train_classifier)
from embinterp.graph import DataError, Graph, NodeGrouping, sample_non_edges
from embinterp.sgns import TrainConfig
from embinterp.walks import WalkConfig

from conftest import planted_blocks


def auc_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == 0.75
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=1000))
def test_auc_matches_exhaustive(data):
    scores = [s / 4 for s, _ in data]
    labels = [y for _, y in data]
    if all(labels) or not any(labels):
        return
    assert auc(scores, labels) == auc_oracle(scores, labels)


def test_micro_f1_examples():
    assert micro_f1([{1}, {2, 3}], [{1}, {2, 3}]) == 1.0
    # TP=2, FP=1, FN=1
    assert micro_f1([{1, 2}, {3}], [{1}, {3, 4}]) == pytest.approx(2 / 3)
    assert micro_f1([set(), set()], [{1}, {2}]) == 0.0
    with pytest.raises(ValueError):
        micro_f1([], [])


def pooled_oracle(pred, truth):
    tp = fp = fn = 0
    for p, t in zip(pred, truth):
        for lab in set(p) | set(t):
            tp += lab in p and lab in t
            fp += lab in p and lab not in t
            fn += lab not in p and lab in t
    return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 1.0


label_sets = st.frozensets(st.integers(0, 6), max_size=4)


@given(st.lists(st.tuples(label_sets, label_sets), min_size=1, max_size=200))
def test_micro_f1_matches_pooled_counts(pairs):
    pred, truth = zip(*pairs)
    assert micro_f1(pred, truth) == pooled_oracle(pred, truth)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=300))
def test_binary_f1_harmonic_mean(pairs):
    p, t = zip(*pairs)
    tp = sum(a and b for a, b in pairs)
    fp = sum(a and not b for a, b in pairs)
    fn = sum(b and not a for a, b in pairs)
    if tp == 0:
        assert f1_binary(p, t) == 0.0
    else:
        prec, rec = tp / (tp + fp), tp / (tp + fn)
        assert f1_binary(p, t) == pytest.approx(2 * prec * rec / (prec + rec), abs=1e-15)


def test_pair_dataset_exhaustive():
    g = NodeGrouping.from_partition([0, 0, 1, 1])
    d = build_pair_dataset(g, 0, seed=0, exhaustive=True)
    pos = {tuple(p) for p, y in zip(d.pairs.tolist(), d.labels) if y}
    neg = {tuple(p) for p, y in zip(d.pairs.tolist(), d.labels) if not y}
    assert pos == {(0, 1), (2, 3)}
    assert len(neg) == 2 and neg <= {(0, 2), (0, 3), (1, 2), (1, 3)}


def test_pair_dataset_single_group_errors():
    with pytest.raises(DataError):
        build_pair_dataset(NodeGrouping.from_partition([0, 0, 0]), 4, 0)


def test_pair_dataset_labels_and_balance():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, 100)
    d = build_pair_dataset(NodeGrouping.from_partition(labels), 1000, seed=3)
    assert len(d) == 1000 and abs(int(d.labels.sum()) - 500) <= 1
    seen = set()
    for (u, v), y in zip(d.pairs.tolist(), d.labels):
        assert u != v and (u, v) not in seen
        seen.add((u, v))
        assert y == int(labels[u] == labels[v])
    d2 = build_pair_dataset(NodeGrouping.from_partition(labels), 1000, seed=3)
    assert np.array_equal(d.pairs, d2.pairs)


def test_pair_dataset_multilabel_intersection():
    g = NodeGrouping("multilabel", 3, [(0, 1), (1,), (2,), (0,), ()])
    d = build_pair_dataset(g, 4, seed=1)
    for (u, v), y in zip(d.pairs.tolist(), d.labels):
        assert 4 not in (u, v)
        assert y == int(bool(set(g.membership[u]) & set(g.membership[v])))


def test_pair_dataset_insufficient():
    with pytest.raises(DataError):
        build_pair_dataset(NodeGrouping.from_partition([0, 0, 1, 1]), 10, 0)


def test_pair_features():
    u = np.array([1.0, 2.0])
    assert pair_features(u, np.ones(2)).tolist() == [1.0, 2.0]
    assert pair_features(u, u, "abs_diff").tolist() == [0.0, 0.0]
    assert pair_features([1, 2], [3, -1]).tolist() == [3.0, -2.0]
    assert pair_features([1, 2], [3, 4], "average").tolist() == [2.0, 3.0]
    assert pair_features([1, 2], [3, 4], "concat").tolist() == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        pair_features([1, 2], [1, 2, 3])


def _fd(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_logistic_gradient(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(20, 4)), rng.integers(0, 2, 20).astype(float)
    w, b = rng.normal(size=4), float(rng.normal())
    _, gw, gb = logistic_loss_grad(w, b, X, y, 0.1)
    assert np.abs(gw - _fd(lambda x: logistic_loss_grad(x, b, X, y, 0.1)[0], w)).max() < 1e-5
    fb = _fd(lambda x: logistic_loss_grad(w, x[0], X, y, 0.1)[0], np.array([b]))[0]
    assert abs(gb - fb) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_softmax_gradient(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(15, 3)), rng.integers(0, 4, 15)
    W, b = rng.normal(size=(4, 3)), rng.normal(size=4)
    _, gW, gb = softmax_loss_grad(W, b, X, y, 0.05)
    assert np.abs(gW - _fd(lambda x: softmax_loss_grad(x, b, X, y, 0.05)[0], W)).max() < 1e-5
    assert np.abs(gb - _fd(lambda x: softmax_loss_grad(W, x, X, y, 0.05)[0], b)).max() < 1e-5


def _blobs(k, n_per, seed, sep=6.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, 5)) * sep
    X = np.concatenate([c + rng.normal(size=(n_per, 5)) for c in centers])
    y = np.repeat(np.arange(k), n_per)
    return X, y


def test_separable_binary():
    X, y = _blobs(2, 200, 0)
    tr, te = stratified_split(y, 0.2, 0)
    m = train_classifier(X[tr], y[tr], "binary")
    assert f1_binary(m.predict(X[te]), y[te]) >= 0.98


def test_random_labels_chance_level():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(2000, 8))
    y = np.repeat([0, 1], 1000)
    rng.shuffle(y)
    tr, te = stratified_split(y, 0.2, 0)
    m = train_classifier(X[tr], y[tr], "binary")
    assert abs(f1_binary(m.predict(X[te]), y[te]) - 0.5) <= 0.1


def test_separable_multiclass():
    X, y = _blobs(3, 150, 2)
    tr, te = stratified_split(y, 0.2, 0)
    m = train_classifier(X[tr], y[tr], "multiclass")
    assert micro_f1(m.predict(X[te]).tolist(), y[te].tolist()) >= 0.98


def test_one_vs_rest_top_r():
    X, y = _blobs(4, 100, 3)
    Y = np.zeros((400, 4), dtype=bool)
    Y[np.arange(400), y] = True
    m = train_classifier(X, Y, "one_vs_rest_multilabel")
    pred = m.predict_top_r(X[:5], [1, 2, 1, 0, 1])
    assert [len(p) for p in pred] == [1, 2, 1, 0, 1]
    assert pred[0] == (int(y[0]),)


def test_degenerate_input_errors():
    with pytest.raises(DataError):
        train_classifier(np.zeros((4, 2)), [1, 1, 1, 1], "binary")
    with pytest.raises(DataError):
        train_classifier(np.zeros((4, 2)), [2, 2, 2, 2], "multiclass")


def test_stratified_split_proportions():
    y = np.repeat([0, 1, 2], [50, 30, 20])
    tr, te = stratified_split(y, 0.2, 0)
    assert np.bincount(y[te]).tolist() == [10, 6, 4]
    assert set(tr) | set(te) == set(range(100)) and not set(tr) & set(te)


def test_holdout_keeps_components():
    g, _ = planted_blocks([40, 40], 0.3, 0.01, 0)
    held, residual = split_holdout_edges(g, 0.3, seed=1)
    assert held.shape[0] == round(0.3 * g.num_edges)
    assert residual.num_edges == g.num_edges - held.shape[0]
    assert connected_components(residual.to_scipy())[0] == connected_components(g.to_scipy())[0]
    with pytest.raises(ValueError):
        split_holdout_edges(g, 0.5, 0)


def test_holdout_too_small():
    tree = Graph.from_edges([(0, 1), (1, 2)], 3)
    with pytest.raises(DataError):
        split_holdout_edges(tree, 0.4, 0)


@pytest.fixture(scope="module")
def sbm():
    return planted_blocks([100, 100], 0.3, 0.01, 5)


LP_WALK = WalkConfig(10, 40, 1)
LP_TRAIN = TrainConfig(dim=32, window=5, epochs=2, seed=1)


def block_oracle_auc(g, block, seed):
    """AUC of the true-block indicator on the exact held-out test pairs of ``seed``.

    Within a block edges are i.i.d., so no scorer can beat this by more than noise.
    """
    held, _ = split_holdout_edges(g, 0.2, seed)
    h = held.shape[0]
    neg = np.asarray(sample_non_edges(g, 2 * h, seed + 1))[:h]
    pairs = np.concatenate([held, neg])
    same = (block[pairs[:, 0]] == block[pairs[:, 1]]).astype(float)
    return auc(same, np.r_[np.ones(h), np.zeros(h)])


@pytest.fixture(scope="module")
def sbm_lp(sbm):
    g, _ = sbm
    return [link_prediction_eval(g, 0.2, LP_WALK, LP_TRAIN, seed=s).value for s in range(2)]


def test_link_prediction_sbm_reaches_block_ceiling(sbm, sbm_lp):
    g, block = sbm
    for seed, value in enumerate(sbm_lp):
        assert value >= block_oracle_auc(g, block, seed) - 0.05


@pytest.mark.xfail(strict=True, reason="uniform non-edge negatives cap AUC near 0.78 on this "
                   "blockmodel: ~41% of negatives are within-block, 97% of positives are")
def test_link_prediction_sbm_threshold(sbm_lp):
    assert min(sbm_lp) >= 0.85


def _suite(g, block, ext, tasks=None, seed=0):
    internal = NodeGrouping.from_partition(block)
    cfg = EvalConfig(tasks=tasks or EvalConfig.tasks, num_pairs=400, seed=seed)
    rng = np.random.default_rng(0)
    vectors = rng.normal(size=(g.num_nodes, 16)) + block[:, None] * 0.8
    return run_task_suite(vectors, g, internal, ext, cfg, LP_WALK, TrainConfig(dim=16, window=5, epochs=1))


def _external(block):
    memb = [(int(b), 2) if i % 3 == 0 else (int(b),) for i, b in enumerate(block)]
    return NodeGrouping("multilabel", 3, memb)


def test_suite_report_counts(sbm):
    g, block = sbm
    full = _suite(g, block, _external(block))
    assert [r.task for r in full] == ["group_binary", "group_multilabel", "community_binary",
                                      "community_multiclass", "link_prediction"]
    assert [r.metric for r in full] == ["F1", "micro-F1", "F1", "micro-F1", "AUC"]
    partial = _suite(g, block, None)
    assert [r.task for r in partial] == ["community_binary", "community_multiclass", "link_prediction"]
    again = _suite(g, block, _external(block))
    assert [r.value for r in again] == [r.value for r in full]


def test_suite_permutation_invariant(sbm):
    g, block = sbm
    tasks = ("group_binary", "community_multiclass", "group_multilabel", "link_prediction")
    base = _suite(g, block, _external(block), tasks)
    rng = np.random.default_rng(1)
    vectors = rng.normal(size=(g.num_nodes, 16)) + block[:, None] * 0.8
    perm = np.random.default_rng(7).permutation(g.num_nodes)
    gp = g.relabeled(perm)
    vp = np.empty_like(vectors)
    vp[perm] = np.random.default_rng(0).normal(size=(g.num_nodes, 16)) + block[:, None] * 0.8
    ext = _external(block).permuted(perm)
    internal = NodeGrouping.from_partition(block).permuted(perm)
    cfg = EvalConfig(tasks=tasks, num_pairs=400, seed=0)
    got = run_task_suite(vp, gp, internal, ext, cfg, LP_WALK, TrainConfig(dim=16, window=5, epochs=1))
    assert [r.value for r in got] == [r.value for r in base]
