"""Skip-gram with negative sampling over a walk corpus."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .walks import WalkCorpus, _xorshift, walk_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    unigram_exponent: float = 0.75
    subsample_threshold: float = 0.0
    shrink_window: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.min_learning_rate <= self.initial_learning_rate:
            raise ValueError("need 0 <= min_learning_rate <= initial_learning_rate")
        if self.subsample_threshold < 0:
            raise ValueError("subsample_threshold must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Vocab:
    """Vocabulary over corpus tokens.

    Vocab index ``i`` corresponds to corpus token ``nodes[i]``; nodes are
    kept in ascending token order.
    """

    nodes: np.ndarray
    counts: np.ndarray
    noise: np.ndarray
    index: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def noise_alias(self) -> tuple[np.ndarray, np.ndarray]:
        return alias_table(self.noise)


def alias_table(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table: slot i keeps i with prob[i], else yields alias[i]."""
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    scaled = p / p.sum() * n
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int32)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s], alias[s] = scaled[s], l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    # leftovers are 1 up to rounding
    return prob, alias


def build_vocab(corpus: WalkCorpus, config: TrainConfig | None = None,
                unigram_exponent: float | None = None) -> Vocab:
    if corpus.total_tokens == 0:
        raise ValueError("empty corpus")
    if unigram_exponent is None:
        unigram_exponent = config.unigram_exponent if config is not None else 0.75
    counts_all = np.bincount(corpus.tokens)
    nodes = np.flatnonzero(counts_all).astype(np.int32)
    counts = counts_all[nodes].astype(np.int64)
    weights = counts.astype(np.float64) ** unigram_exponent
    noise = weights / weights.sum()
    index = np.full(counts_all.shape[0], -1, dtype=np.int32)
    index[nodes] = np.arange(nodes.shape[0], dtype=np.int32)
    return Vocab(nodes, counts, noise, index)


@dataclass
class EmbeddingMatrix:
    """Trained node vectors.

    Row ``i`` of ``vectors`` belongs to the node named ``ids[i]``. Column ``d``
    is embedding dimension ``d``.
    """

    vectors: np.ndarray
    ids: tuple[str, ...]
    context_vectors: np.ndarray | None = None
    epoch_loss: list[float] = field(default_factory=list)
    positive_pairs: int = 0

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def aligned(self, ids: Sequence[str]) -> np.ndarray:
        """Rows reordered to ``ids``; nodes without a vector get zeros."""
        pos = {name: i for i, name in enumerate(self.ids)}
        out = np.zeros((len(ids), self.dim), dtype=self.vectors.dtype)
        for j, name in enumerate(ids):
            i = pos.get(name)
            if i is not None:
                out[j] = self.vectors[i]
        return out

    def save(self, path) -> Path:
        """Text file ``N D`` + ``id v1 .. vD`` rows, plus a ``.bin`` float32 sidecar."""
        path = Path(path)
        vec = np.ascontiguousarray(self.vectors, dtype="<f4")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{vec.shape[0]} {vec.shape[1]}\n")
            for name, row in zip(self.ids, vec):
                fh.write(name + " " + " ".join(repr(float(x)) for x in row) + "\n")
        sidecar = path.with_suffix(path.suffix + ".bin")
        sidecar.write_bytes(vec.tobytes(order="C"))
        return sidecar

    @classmethod
    def load(cls, path) -> "EmbeddingMatrix":
        with open(path, encoding="utf-8") as fh:
            head = fh.readline().split()
            n, d = int(head[0]), int(head[1])
            ids = []
            vec = np.empty((n, d), dtype=np.float32)
            for i in range(n):
                parts = fh.readline().split()
                if len(parts) != d + 1:
                    raise ValueError(f"{path}: row {i + 2} has {len(parts) - 1} values, expected {d}")
                ids.append(parts[0])
                vec[i] = np.asarray(parts[1:], dtype=np.float32)
        return cls(vec, tuple(ids))

    @classmethod
    def load_binary(cls, path, ids: Sequence[str]) -> "EmbeddingMatrix":
        raw = np.fromfile(path, dtype="<f4")
        return cls(raw.reshape(len(ids), -1).astype(np.float32), tuple(ids))


@numba.njit(cache=True, inline="always")
def _sigmoid_and_log(x):
    """sigma(x) and log sigma(x), sharing one exp."""
    e = math.exp(-abs(x))
    if x >= 0:
        return 1.0 / (1.0 + e), -math.log1p(e)
    return e / (1.0 + e), x - math.log1p(e)


@numba.njit(cache=True, inline="always")
def _uniform(s):
    return (s >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, inline="always")
def _draw_noise(s, prob, alias):
    s = _xorshift(s)
    slot = np.int64(_uniform(s) * prob.shape[0])
    s = _xorshift(s)
    if _uniform(s) < prob[slot]:
        return s, slot
    return s, np.int64(alias[slot])


@numba.njit(cache=True)
def sample_noise(prob, alias, count, seed):
    """``count`` draws from an alias table, using the training sampler."""
    s = walk_seed(seed, 0, 0)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        s, out[i] = _draw_noise(s, prob, alias)
    return out


@numba.njit(cache=True, fastmath=True)
def _train_range(syn0, syn1, tokens, offsets, w_lo, w_hi, keep_prob, prob, alias,
                 window, negatives, shrink, lr0, lr_min, total_work, done_before,
                 state, neu1e, buf):
    """One worker's pass over walks ``w_lo..w_hi``. Returns (loss sum, pairs, tokens)."""
    dim = syn0.shape[1]
    n_vocab = syn0.shape[0]
    loss = 0.0
    pairs = 0
    done = 0
    s = state[0]
    for w in range(w_lo, w_hi):
        a, b = offsets[w], offsets[w + 1]
        m = 0
        for p in range(a, b):
            t = tokens[p]
            if keep_prob[t] < 1.0:
                s = _xorshift(s)
                if _uniform(s) >= keep_prob[t]:
                    continue
            buf[m] = t
            m += 1
        for i in range(m):
            progress = (done_before + done) / total_work
            if progress > 1.0:
                progress = 1.0
            lr = lr0 - (lr0 - lr_min) * progress
            done += 1
            center = buf[i]
            span = window
            if shrink:
                s = _xorshift(s)
                span = window - np.int64((s >> np.uint64(11)) % np.uint64(window))
            lo = max(0, i - span)
            hi = min(m, i + span + 1)
            crow = syn0[center]
            for j in range(lo, hi):
                if j == i:
                    continue
                ctx = buf[j]
                for k in range(dim):
                    neu1e[k] = 0.0
                for q in range(negatives + 1):
                    if q == 0:
                        target = ctx
                        label = 1.0
                    else:
                        if n_vocab < 2:
                            break
                        s, target = _draw_noise(s, prob, alias)
                        while target == ctx:
                            s, target = _draw_noise(s, prob, alias)
                        label = 0.0
                    trow = syn1[target]
                    dot = np.float32(0.0)
                    for k in range(dim):
                        dot += crow[k] * trow[k]
                    if label > 0.0:
                        sg, ls = _sigmoid_and_log(dot)
                    else:
                        sneg, ls = _sigmoid_and_log(-dot)
                        sg = 1.0 - sneg
                    loss -= ls
                    g = np.float32((label - sg) * lr)
                    # separate loops over 1-d rows so they vectorize
                    for k in range(dim):
                        neu1e[k] += g * trow[k]
                    for k in range(dim):
                        trow[k] += g * crow[k]
                for k in range(dim):
                    crow[k] += neu1e[k]
                pairs += 1
    state[0] = s
    return loss, pairs, done


@numba.njit(cache=True, parallel=True)
def _train_parallel(syn0, syn1, tokens, offsets, bounds, keep_prob, prob, alias, window,
                    negatives, shrink, lr0, lr_min, total_work, done_before, states,
                    max_len, losses, pair_counts, done_counts):
    # lock-free shared updates across shards (accepted races)
    n_shards = bounds.shape[0] - 1
    dim = syn0.shape[1]
    for sh in numba.prange(n_shards):
        neu1e = np.empty(dim, dtype=syn0.dtype)
        buf = np.empty(max_len, dtype=np.int32)
        st = states[sh:sh + 1]
        # each shard advances the schedule as if it were 1/n of the total work
        l, p, d = _train_range(syn0, syn1, tokens, offsets, bounds[sh], bounds[sh + 1],
                               keep_prob, prob, alias, window, negatives, shrink, lr0, lr_min,
                               total_work / n_shards, done_before[sh], st, neu1e, buf)
        losses[sh] = l
        pair_counts[sh] = p
        done_counts[sh] = d


def _keep_probabilities(vocab: Vocab, threshold: float) -> np.ndarray:
    if threshold <= 0:
        return np.ones(len(vocab), dtype=np.float64)
    freq = vocab.counts / vocab.counts.sum()
    ratio = threshold / freq
    return np.minimum(1.0, np.sqrt(ratio) + ratio)


def init_vectors(n: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    syn0 = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    syn1 = np.zeros((n, dim), dtype=np.float32)
    return syn0, syn1


def train(corpus: WalkCorpus, config: TrainConfig, vocab: Vocab | None = None,
          keep_context: bool = False) -> EmbeddingMatrix:
    """Fit SGNS input vectors; returns one row per node that occurs in ``corpus``.

    With ``workers == 1`` the result is a deterministic function of
    ``(corpus, config)``. With more workers, walk shards are trained
    concurrently against the same matrices without locking.
    """
    if vocab is None:
        vocab = build_vocab(corpus, config)
    n = len(vocab)
    if n == 0:
        raise ValueError("empty vocabulary")
    tokens = vocab.index[corpus.tokens].astype(np.int32)
    if (tokens < 0).any():
        raise ValueError("corpus token missing from vocabulary")
    offsets = corpus.offsets.astype(np.int64)
    syn0, syn1 = init_vectors(n, config.dim, config.seed)
    keep = _keep_probabilities(vocab, config.subsample_threshold)
    prob, alias = vocab.noise_alias
    max_len = int(np.diff(offsets).max()) if corpus.num_walks else 0
    total_work = float(config.epochs * corpus.total_tokens)
    shrink = config.shrink_window
    losses: list[float] = []
    total_pairs = 0

    workers = min(config.workers, max(1, corpus.num_walks))
    if workers == 1:
        state = np.array([walk_seed(config.seed, 0x5EED, 0)], dtype=np.uint64)
        neu1e = np.empty(config.dim, dtype=np.float32)
        buf = np.empty(max_len, dtype=np.int32)
        done = 0
        for epoch in range(config.epochs):
            loss, pairs, d = _train_range(syn0, syn1, tokens, offsets, 0, corpus.num_walks,
                                          keep, prob, alias, config.window, config.negatives, shrink,
                                          config.initial_learning_rate, config.min_learning_rate,
                                          total_work, done, state, neu1e, buf)
            done += d
            total_pairs += pairs
            losses.append(loss / pairs if pairs else 0.0)
            log.debug("epoch %d: mean loss %.5f over %d pairs", epoch, losses[-1], pairs)
    else:
        bounds = np.linspace(0, corpus.num_walks, workers + 1).astype(np.int64)
        states = np.array([walk_seed(config.seed, 0x5EED, i) for i in range(workers)], dtype=np.uint64)
        done = np.zeros(workers, dtype=np.float64)
        prev = numba.get_num_threads()
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
        try:
            for epoch in range(config.epochs):
                l = np.zeros(workers)
                p = np.zeros(workers, dtype=np.int64)
                d = np.zeros(workers, dtype=np.int64)
                _train_parallel(syn0, syn1, tokens, offsets, bounds, keep, prob, alias, config.window,
                                config.negatives, shrink, config.initial_learning_rate,
                                config.min_learning_rate, total_work, done, states, max_len, l, p, d)
                done += d
                total_pairs += int(p.sum())
                losses.append(float(l.sum() / p.sum()) if p.sum() else 0.0)
        finally:
            numba.set_num_threads(prev)

    ids = tuple(corpus.ids[i] for i in vocab.nodes)
    return EmbeddingMatrix(syn0, ids, syn1 if keep_context else None, losses, total_pairs)


def sgns_loss_and_grads(center: np.ndarray, context: np.ndarray, negatives: Sequence[np.ndarray]):
    """Negative-sampling loss for one positive pair and its exact gradients.

    Returns ``(loss, grad_center, grad_context, grad_negatives)`` where
    ``loss = -log s(u.v) - sum_n log s(-u.v_n)``.
    """
    u = np.asarray(center, dtype=np.float64)
    v = np.asarray(context, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.float64).reshape(-1, u.shape[0])
    if u.shape != v.shape:
        raise ValueError("center and context dimensions differ")
    if not (np.isfinite(u).all() and np.isfinite(v).all() and np.isfinite(negs).all()):
        raise ValueError("non-finite input")
    pos = u @ v
    neg = negs @ u
    loss = -_np_log_sigmoid(pos) - _np_log_sigmoid(-neg).sum()
    # d/dx -log s(x) = s(x) - 1 ; d/dx -log s(-x) = s(x)
    gp = _np_sigmoid(pos) - 1.0
    gn = _np_sigmoid(neg)
    grad_u = gp * v + gn @ negs
    grad_v = gp * u
    grad_negs = gn[:, None] * u[None, :]
    return float(loss), grad_u, grad_v, grad_negs


def _np_sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _np_log_sigmoid(x):
    return -np.logaddexp(0.0, -x)
