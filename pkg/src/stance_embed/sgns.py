"""Topic-aware skip-gram with negative sampling.

A training pair is a source node ``u`` on topic ``t`` and a signed context
``c = (node, sign)``. The source representation is ``h = sigma(W_t[t], W_u[u])``
and each pair takes one SGD step on

    -log s(W_c[c] . h) - sum_neg log s(-W_c[neg] . h)

with negatives drawn from the topic's context vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numba import njit, prange

from ._seeding import derive_seed, derive_seed32
from .contexts import ContextConfig, context_counts, pairs_per_walk
from .graph import SignedTopicGraph
from .walks import WalkCorpus

MAX_NEGATIVE_RETRIES = 10
MIN_LR_FRACTION = 1e-4

_MODE_CODES = {"mask": 0, "addition": 1, "hadamard": 2}


class CombineMode(str, Enum):
    MASK = "mask"
    ADDITION = "addition"
    HADAMARD = "hadamard"

    @property
    def code(self) -> int:
        return _MODE_CODES[self.value]


@dataclass(frozen=True)
class TrainerConfig:
    dim: int = 64
    sigma_mode: CombineMode = CombineMode.MASK
    negatives: int = 20
    subsample: float = 1e-5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigma_mode", CombineMode(self.sigma_mode))
        if self.dim < 1 or self.negatives < 1 or self.epochs < 1 or self.threads < 1:
            raise ValueError("dim, negatives, epochs and threads must be positive")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample threshold must be in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(eq=False)
class EmbeddingStore:
    """Learned tables.

    ``context_table`` row ``2*v`` is ``(v, +)`` and row ``2*v + 1`` is ``(v, -)``.
    ``topic_table`` is ``None`` for stores trained without topic parameters.
    """

    node_table: np.ndarray
    context_table: np.ndarray
    topic_table: np.ndarray | None
    node_names: tuple[str, ...]
    topic_names: tuple[str, ...]
    sigma_mode: CombineMode = CombineMode.MASK
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.node_table.shape[1]

    def copy(self) -> EmbeddingStore:
        return replace(
            self,
            node_table=self.node_table.copy(),
            context_table=self.context_table.copy(),
            topic_table=None if self.topic_table is None else self.topic_table.copy(),
            epoch_losses=list(self.epoch_losses),
        )

    def save(self, directory) -> dict[str, Path]:
        """Write ``nodes.txt``, ``contexts.txt`` and ``topics.txt`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ctx_names = [f"{n}__{s}" for n in self.node_names for s in ("pos", "neg")]
        topics = self.topic_table if self.topic_table is not None else np.zeros((0, self.dim))
        paths = {
            "nodes": directory / "nodes.txt",
            "contexts": directory / "contexts.txt",
            "topics": directory / "topics.txt",
        }
        write_vectors(paths["nodes"], self.node_names, self.node_table)
        write_vectors(paths["contexts"], ctx_names, self.context_table)
        write_vectors(paths["topics"], self.topic_names if self.topic_table is not None else (), topics)
        return paths

    @classmethod
    def load(cls, directory, sigma_mode: CombineMode | str = CombineMode.MASK) -> EmbeddingStore:
        directory = Path(directory)
        node_names, nodes = read_vectors(directory / "nodes.txt")
        _, contexts = read_vectors(directory / "contexts.txt")
        topic_names, topics = read_vectors(directory / "topics.txt")
        return cls(nodes, contexts, topics, tuple(node_names), tuple(topic_names), CombineMode(sigma_mode))


def write_vectors(path, names, table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{table.shape[0]} {table.shape[1]}\n")
        for name, row in zip(names, table):
            fh.write(name + " " + " ".join(repr(float(x)) for x in row) + "\n")


def read_vectors(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        count, dim = (int(x) for x in fh.readline().split())
        names, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            names.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    table = np.array(rows, dtype=np.float64).reshape(count, dim)
    return names, table


def combine_sigma(mode: CombineMode | str, w_t: np.ndarray, w_u: np.ndarray) -> np.ndarray:
    """Merge a topic vector into a node vector."""
    w_t = np.asarray(w_t, dtype=np.float64)
    w_u = np.asarray(w_u, dtype=np.float64)
    if w_t.shape != w_u.shape:
        raise ValueError(f"dimension mismatch: {w_t.shape} vs {w_u.shape}")
    mode = CombineMode(mode)
    if mode is CombineMode.MASK:
        return w_u.copy()
    if mode is CombineMode.ADDITION:
        return w_t + w_u
    return w_t * w_u


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def pair_loss_and_grads(h, w_pos, negs):
    """Negative-sampling loss for one pair and its exact gradients.

    Returns ``(loss, grad_h, grad_pos, grad_negs)``; ``grad_negs`` has one row
    per negative.
    """
    h = np.asarray(h, dtype=np.float64)
    w_pos = np.asarray(w_pos, dtype=np.float64)
    negs = np.asarray(negs, dtype=np.float64).reshape(-1, h.shape[0])
    s_pos = float(w_pos @ h)
    s_neg = negs @ h
    loss = -float(log_sigmoid(s_pos)) - float(log_sigmoid(-s_neg).sum())
    g_pos = float(sigmoid(s_pos)) - 1.0
    g_neg = sigmoid(s_neg)
    grad_h = g_pos * w_pos + g_neg @ negs
    return loss, grad_h, g_pos * h, g_neg[:, None] * h[None, :]


def sigma_backward(mode: CombineMode | str, w_t, w_u, grad_h):
    """Route ``d loss / d h`` back to ``(grad_topic, grad_node)``; mask gives no topic gradient."""
    mode = CombineMode(mode)
    grad_h = np.asarray(grad_h, dtype=np.float64)
    if mode is CombineMode.MASK:
        return np.zeros_like(grad_h), grad_h.copy()
    if mode is CombineMode.ADDITION:
        return grad_h.copy(), grad_h.copy()
    return grad_h * w_u, grad_h * w_t


def discard_probability(freq, threshold: float):
    """``max(0, 1 - sqrt(threshold / f))``; zero for unseen nodes."""
    freq = np.asarray(freq, dtype=np.float64)
    with np.errstate(divide="ignore"):
        p = 1.0 - np.sqrt(threshold / freq)
    return np.where(freq > 0, np.maximum(p, 0.0), 0.0)


def should_discard(node: int, corpus_freqs: np.ndarray, threshold: float, rng) -> bool:
    return bool(rng.random() < discard_probability(corpus_freqs[node], threshold))


def alias_table(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table: slot ``i`` yields ``i`` with probability ``prob[i]``, else ``alias[i]``."""
    n = len(weights)
    scaled = np.asarray(weights, dtype=np.float64) * n / np.sum(weights)
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        lo, hi = small.pop(), large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        (small if scaled[hi] < 1.0 else large).append(hi)
    return prob, alias


@dataclass(frozen=True)
class NoiseDistribution:
    """Per-topic negative-sampling tables over context rows, weights ``count ** power``.

    Topic ``t`` owns slots ``ptr[t]:ptr[t+1]``: ``rows`` are the context rows,
    ``weights`` their unnormalised weights and ``prob``/``alias`` an alias
    table with topic-local alias indices.
    """

    ptr: np.ndarray
    rows: np.ndarray
    weights: np.ndarray
    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def from_counts(cls, counts: np.ndarray, power: float = 0.75) -> NoiseDistribution:
        counts = np.atleast_2d(counts)
        ptr = [0]
        rows, weights, probs, aliases = [], [], [], []
        for per_topic in counts:
            nz = np.flatnonzero(per_topic)
            w = per_topic[nz].astype(np.float64) ** power
            prob, alias = alias_table(w) if len(nz) else (np.zeros(0), np.zeros(0, np.int64))
            rows.append(nz.astype(np.int64))
            weights.append(w)
            probs.append(prob)
            aliases.append(alias)
            ptr.append(ptr[-1] + len(nz))
        return cls(
            np.array(ptr, dtype=np.int64),
            np.concatenate(rows),
            np.concatenate(weights),
            np.concatenate(probs),
            np.concatenate(aliases),
        )

    def vocabulary(self, topic: int) -> np.ndarray:
        return self.rows[self.ptr[topic] : self.ptr[topic + 1]]

    def probabilities(self, topic: int) -> np.ndarray:
        w = self.weights[self.ptr[topic] : self.ptr[topic + 1]]
        return w / w.sum()

    def draw(self, topic: int, u1: float, u2: float) -> int:
        lo, hi = self.ptr[topic], self.ptr[topic + 1]
        i = min(int(u1 * (hi - lo)), hi - lo - 1)
        if u2 >= self.prob[lo + i]:
            i = self.alias[lo + i]
        return int(self.rows[lo + i])


def sample_negatives(topic: int, count: int, noise: NoiseDistribution, rng, positive: int | None = None) -> list[int]:
    """Draw ``count`` context rows for ``topic``, redrawing hits on ``positive``."""
    lo, hi = noise.ptr[topic], noise.ptr[topic + 1]
    if hi == lo:
        raise ValueError(f"topic {topic} has an empty context vocabulary")
    out = []
    for _ in range(count):
        for _ in range(MAX_NEGATIVE_RETRIES):
            row = noise.draw(topic, rng.random(), rng.random())
            if row != positive:
                out.append(row)
                break
        else:
            raise RuntimeError(
                f"could not draw a negative different from the positive context after "
                f"{MAX_NEGATIVE_RETRIES} tries (topic {topic})"
            )
    return out


def init_store(g: SignedTopicGraph, cfg: TrainerConfig, topic_aware: bool = True) -> EmbeddingStore:
    """Initial tables: node/topic rows uniform in ``+-0.5/dim``, contexts zero.

    Under hadamard combination the topic rows start around 1 instead, so the
    initial product is the node vector itself rather than a vanishing one.
    """
    d = cfg.dim
    node_rng = np.random.default_rng(derive_seed(cfg.seed, "init", "nodes"))
    topic_rng = np.random.default_rng(derive_seed(cfg.seed, "init", "topics"))
    nodes = (node_rng.random((g.n_nodes, d)) - 0.5) / d
    topics = None
    if topic_aware:
        topics = (topic_rng.random((g.n_topics, d)) - 0.5) / d
        if cfg.sigma_mode is CombineMode.HADAMARD:
            topics += 1.0
    contexts = np.zeros((2 * g.n_nodes, d))
    return EmbeddingStore(nodes, contexts, topics, g.node_names, g.topic_names, cfg.sigma_mode)


@dataclass(frozen=True)
class _Plan:
    discard: np.ndarray  # (topics, nodes) discard probabilities
    noise: NoiseDistribution
    total_pairs: int
    seed32: int


def _plan(corpus: WalkCorpus, g: SignedTopicGraph, ctx_cfg: ContextConfig, cfg: TrainerConfig) -> _Plan:
    totals = corpus.counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        freqs = np.where(totals > 0, corpus.counts / np.maximum(totals, 1), 0.0)
    discard = discard_probability(freqs, cfg.subsample)
    noise = NoiseDistribution.from_counts(context_counts(corpus, g.n_nodes, g.n_topics, ctx_cfg.window))
    total = max(int(pairs_per_walk(corpus.lengths, ctx_cfg.window).sum()) * cfg.epochs, 1)
    return _Plan(discard, noise, total, derive_seed32(cfg.seed, "trainer"))


def train(
    corpus: WalkCorpus,
    g: SignedTopicGraph,
    ctx_cfg: ContextConfig,
    cfg: TrainerConfig,
    *,
    topic_aware: bool = True,
    engine: str = "compiled",
) -> EmbeddingStore:
    """Fit the three tables with per-pair SGD over ``cfg.epochs`` passes.

    Walk order is reshuffled every epoch, source and context occurrences are
    subsampled independently, and the learning rate decays linearly to
    ``1e-4`` of its initial value over all scheduled pairs. ``threads > 1``
    switches to lock-free parallel updates, which are not reproducible.
    ``topic_aware=False`` trains without any topic table (mask mode only).
    """
    if not topic_aware and cfg.sigma_mode is not CombineMode.MASK:
        raise ValueError("training without a topic table requires sigma_mode=mask")
    store = init_store(g, cfg, topic_aware)
    if len(corpus) == 0:
        store.epoch_losses = [0.0] * cfg.epochs
        return store
    plan = _plan(corpus, g, ctx_cfg, cfg)
    if engine == "python":
        losses = _train_reference(corpus, store, ctx_cfg, cfg, plan)
    elif engine == "compiled":
        topics = store.topic_table if store.topic_table is not None else np.zeros((0, cfg.dim))
        args = (
            corpus.nodes, corpus.signs, corpus.lengths, corpus.topics,
            plan.discard, plan.noise.ptr, plan.noise.rows, plan.noise.prob, plan.noise.alias,
            store.node_table, store.context_table, topics,
            cfg.sigma_mode.code, ctx_cfg.window, cfg.negatives, cfg.epochs,
            cfg.learning_rate, plan.total_pairs, plan.seed32,
        )
        if cfg.threads > 1:
            losses = _train_parallel(*args, cfg.threads)
        else:
            losses = _train_kernel(*args)
        losses = [float(x) for x in losses]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    store.epoch_losses = losses
    return store


def _shuffle(order: np.ndarray, rng) -> None:
    for i in range(len(order) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        order[i], order[j] = order[j], order[i]


def _train_reference(corpus, store, ctx_cfg, cfg, plan) -> list[float]:
    """Plain-Python twin of the compiled kernel (same draw order)."""
    rng = np.random.RandomState(plan.seed32)
    W_u, W_c, W_t = store.node_table, store.context_table, store.topic_table
    mode, k = cfg.sigma_mode, ctx_cfg.window
    order = np.arange(len(corpus))
    counter = 0
    losses = []
    for _ in range(cfg.epochs):
        _shuffle(order, rng)
        loss_sum, steps = 0.0, 0
        for w in order:
            t = int(corpus.topics[w])
            L = int(corpus.lengths[w])
            nodes = corpus.nodes[w, :L]
            prefix = np.ones(L, dtype=np.int64)
            prefix[1:] = np.cumprod(corpus.signs[w, : L - 1].astype(np.int64))
            kept = [not rng.random() < plan.discard[t, v] for v in nodes]
            for i in range(L):
                for j in range(max(0, i - k), min(L, i + k + 1)):
                    if j == i:
                        continue
                    alpha = cfg.learning_rate * (1.0 - (1.0 - MIN_LR_FRACTION) * counter / plan.total_pairs)
                    counter += 1
                    if not (kept[i] and kept[j]):
                        continue
                    u = int(nodes[i])
                    pos = 2 * int(nodes[j]) + (0 if prefix[i] * prefix[j] > 0 else 1)
                    negs = []
                    for _ in range(cfg.negatives):
                        for _ in range(MAX_NEGATIVE_RETRIES):
                            row = plan.noise.draw(t, rng.random(), rng.random())
                            if row != pos:
                                negs.append(row)
                                break
                    w_t = W_t[t] if mode is not CombineMode.MASK else np.zeros(cfg.dim)
                    h = combine_sigma(mode, w_t, W_u[u])
                    loss, g_h, g_pos, g_negs = pair_loss_and_grads(h, W_c[pos], W_c[negs])
                    loss_sum += loss
                    steps += 1
                    W_c[pos] -= alpha * g_pos
                    for row, g_row in zip(negs, g_negs):
                        W_c[row] -= alpha * g_row
                    g_t, g_u = sigma_backward(mode, w_t, W_u[u], g_h)
                    W_u[u] -= alpha * g_u
                    if mode is not CombineMode.MASK:
                        W_t[t] -= alpha * g_t
        losses.append(loss_sum / steps if steps else 0.0)
    return losses


# ---------------------------------------------------------------- kernels


@njit(cache=True, inline="always")
def _sigmoid_logs(x):
    """``(s(x), log s(x), log s(-x))`` from a single exp."""
    e = math.exp(-abs(x))
    l1p = math.log1p(e)
    if x >= 0:
        return 1.0 / (1.0 + e), -l1p, -x - l1p
    return e / (1.0 + e), x - l1p, -l1p


@njit(cache=True, inline="always")
def _draw_noise(ptr, rows, prob, alias, t, u1, u2):
    lo = ptr[t]
    n = ptr[t + 1] - lo
    i = min(int(u1 * n), n - 1)
    if u2 >= prob[lo + i]:
        i = alias[lo + i]
    return rows[lo + i]


@njit(cache=True, fastmath={"reassoc", "contract"})
def _pair_step(W_u, W_c, W_t, mode, u, t, pos, negs, n_negs, alpha, h, g_h, gs):
    d = W_u.shape[1]
    wu = W_u[u]
    if mode == 0:
        for c in range(d):
            h[c] = wu[c]
    elif mode == 1:
        wt = W_t[t]
        for c in range(d):
            h[c] = wt[c] + wu[c]
    else:
        wt = W_t[t]
        for c in range(d):
            h[c] = wt[c] * wu[c]
    for c in range(d):
        g_h[c] = 0.0
    loss = 0.0
    for n in range(n_negs + 1):
        row = pos if n == 0 else negs[n - 1]
        wc = W_c[row]
        s = 0.0
        for c in range(d):
            s += wc[c] * h[c]
        sig, log_pos, log_neg = _sigmoid_logs(s)
        if n == 0:
            g = sig - 1.0
            loss -= log_pos
        else:
            g = sig
            loss -= log_neg
        gs[n] = g
        for c in range(d):
            g_h[c] += g * wc[c]
    for n in range(n_negs + 1):
        row = pos if n == 0 else negs[n - 1]
        wc = W_c[row]
        step = alpha * gs[n]
        for c in range(d):
            wc[c] -= step * h[c]
    if mode == 0:
        for c in range(d):
            wu[c] -= alpha * g_h[c]
    elif mode == 1:
        wt = W_t[t]
        for c in range(d):
            wu[c] -= alpha * g_h[c]
            wt[c] -= alpha * g_h[c]
    else:
        wt = W_t[t]
        for c in range(d):
            a = wt[c]
            b = wu[c]
            wu[c] = b - alpha * g_h[c] * a
            wt[c] = a - alpha * g_h[c] * b
    return loss


@njit(cache=True)
def _run_walks(order, nodes, signs, lengths, topics, discard, ptr, rows, prob, alias,
               W_u, W_c, W_t, mode, k, n_neg, lr, total, counter):
    d = W_u.shape[1]
    width = nodes.shape[1]
    h = np.empty(d)
    g_h = np.empty(d)
    gs = np.empty(n_neg + 1)
    negs = np.empty(n_neg, dtype=np.int64)
    kept = np.empty(width, dtype=np.bool_)
    prefix = np.empty(width, dtype=np.int64)
    loss_sum = 0.0
    steps = 0
    for w in order:
        t = topics[w]
        L = lengths[w]
        prefix[0] = 1
        for m in range(1, L):
            prefix[m] = prefix[m - 1] * signs[w, m - 1]
        for i in range(L):
            kept[i] = not (np.random.random() < discard[t, nodes[w, i]])
        for i in range(L):
            lo = max(0, i - k)
            hi = min(L, i + k + 1)
            for j in range(lo, hi):
                if j == i:
                    continue
                alpha = lr * (1.0 - (1.0 - 1e-4) * counter / total)
                counter += 1
                if not (kept[i] and kept[j]):
                    continue
                pos = 2 * nodes[w, j] + (0 if prefix[i] * prefix[j] > 0 else 1)
                n_got = 0
                for _ in range(n_neg):
                    for _ in range(10):
                        row = _draw_noise(ptr, rows, prob, alias, t, np.random.random(), np.random.random())
                        if row != pos:
                            negs[n_got] = row
                            n_got += 1
                            break
                loss_sum += _pair_step(W_u, W_c, W_t, mode, nodes[w, i], t, pos, negs, n_got, alpha, h, g_h, gs)
                steps += 1
    return loss_sum, steps, counter


@njit(cache=True)
def _train_kernel(nodes, signs, lengths, topics, discard, ptr, rows, prob, alias,
                  W_u, W_c, W_t, mode, k, n_neg, epochs, lr, total, seed):
    np.random.seed(seed)
    n = lengths.shape[0]
    order = np.arange(n)
    losses = np.zeros(epochs)
    counter = 0
    for ep in range(epochs):
        for i in range(n - 1, 0, -1):
            j = int(np.random.random() * (i + 1))
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
        loss_sum, steps, counter = _run_walks(
            order, nodes, signs, lengths, topics, discard, ptr, rows, prob, alias,
            W_u, W_c, W_t, mode, k, n_neg, lr, total, counter,
        )
        losses[ep] = loss_sum / steps if steps > 0 else 0.0
    return losses


@njit(cache=True, parallel=True)
def _train_parallel(nodes, signs, lengths, topics, discard, ptr, rows, prob, alias,
                    W_u, W_c, W_t, mode, k, n_neg, epochs, lr, total, seed, n_chunks):
    n = lengths.shape[0]
    losses = np.zeros(epochs)
    per_epoch = total // epochs
    for ep in range(epochs):
        np.random.seed(seed + ep)
        order = np.random.permutation(n)
        chunk_loss = np.zeros(n_chunks)
        chunk_steps = np.zeros(n_chunks, dtype=np.int64)
        for c in prange(n_chunks):
            np.random.seed(seed + 7919 * (ep + 1) + c)
            lo = c * n // n_chunks
            hi = (c + 1) * n // n_chunks
            # each chunk sees the global schedule position of its own progress
            start = ep * per_epoch + (c * per_epoch) // n_chunks
            ls, st, _ = _run_walks(
                order[lo:hi], nodes, signs, lengths, topics, discard, ptr, rows, prob, alias,
                W_u, W_c, W_t, mode, k, n_neg, lr, total, start,
            )
            chunk_loss[c] = ls
            chunk_steps[c] = st
        s = chunk_steps.sum()
        losses[ep] = chunk_loss.sum() / s if s > 0 else 0.0
    return losses
