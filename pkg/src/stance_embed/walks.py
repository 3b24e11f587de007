"""Second-order (node2vec-style) random walks on per-topic subgraphs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np
from numba import njit, prange

from .graph import SignedTopicGraph, TopicSubgraphView, topic_subgraphs

_MASK64 = (1 << 64) - 1


class DeadEndError(LookupError):
    """The current node has no neighbour to step to."""


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 40
    p: float = 1.5
    q: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")


@dataclass(frozen=True)
class Walk:
    topic: int
    nodes: tuple[int, ...]

    def __len__(self):
        return len(self.nodes)


def transition_weights(
    view: TopicSubgraphView, prev: int | None, curr: int, p: float, q: float
) -> list[tuple[int, float]]:
    """Unnormalised next-step weights from ``curr`` after arriving from ``prev``.

    Returning to ``prev`` gets ``1/p``, a neighbour that is also adjacent to
    ``prev`` gets 1, anything further away gets ``1/q``. The first step of a
    walk (``prev is None``) is uniform.
    """
    nbrs = view.neighbors(curr)
    if not nbrs:
        raise DeadEndError(f"node {curr} has no neighbours in topic {view.topic}")
    if prev is None:
        return [(v, 1.0) for v, _ in nbrs]
    out = []
    for v, _ in nbrs:
        if v == prev:
            w = 1.0 / p
        elif view.has_edge(prev, v):
            w = 1.0
        else:
            w = 1.0 / q
        out.append((v, w))
    return out


def _pick(weights: np.ndarray, u: float) -> int:
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(idx, len(weights) - 1)


def sample_walk(view: TopicSubgraphView, start: int, cfg: WalkConfig, rng: np.random.Generator) -> Walk:
    """One walk of at most ``cfg.walk_length`` nodes starting at ``start``.

    Always consumes exactly ``walk_length - 1`` uniforms from ``rng`` so that
    walks drawn from one stream do not depend on where earlier walks stopped.
    """
    draws = rng.random(cfg.walk_length - 1)
    walk = [start]
    prev = None
    for u in draws:
        curr = walk[-1]
        try:
            options = transition_weights(view, prev, curr, cfg.p, cfg.q)
        except DeadEndError:
            break
        nxt = options[_pick(np.array([w for _, w in options]), u)][0]
        prev = curr
        walk.append(nxt)
    return Walk(view.topic, tuple(walk))


def start_rng(seed: int, topic: int, node: int) -> np.random.Generator:
    """Independent stream for the walks started at ``node`` in ``topic``."""
    key = ((seed & _MASK64) << 64) | ((topic & 0xFFFFFFFF) << 32) | (node & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(eq=False)
class WalkCorpus:
    """All walks as padded arrays, in canonical (topic, start node, walk index) order.

    ``nodes`` is ``(n_walks, walk_length)`` padded with -1; ``signs[i, m]`` is
    the sign of the step ``nodes[i, m] -> nodes[i, m + 1]`` (0 past the end).
    ``counts[t, v]`` is the number of occurrences of ``v`` in topic-``t`` walks.
    """

    nodes: np.ndarray
    signs: np.ndarray
    lengths: np.ndarray
    topics: np.ndarray
    counts: np.ndarray
    symmetrize: bool = True

    def __len__(self) -> int:
        return len(self.lengths)

    def __iter__(self) -> Iterator[Walk]:
        for i in range(len(self)):
            yield self.walk(i)

    def __eq__(self, other):
        if not isinstance(other, WalkCorpus):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("nodes", "signs", "lengths", "topics", "counts")
        )

    def walk(self, i: int) -> Walk:
        return Walk(int(self.topics[i]), tuple(int(v) for v in self.nodes[i, : self.lengths[i]]))

    @property
    def n_tokens(self) -> int:
        return int(self.lengths.sum())

    def frequencies(self, topic: int) -> np.ndarray:
        """Per-node occurrence fraction within ``topic``'s walks."""
        row = self.counts[topic]
        total = row.sum()
        return row / total if total else row.astype(np.float64)


def _count_tokens(nodes, lengths, topics, n_topics, n_nodes) -> np.ndarray:
    counts = np.zeros((n_topics, n_nodes), dtype=np.int64)
    if len(lengths):
        mask = np.arange(nodes.shape[1])[None, :] < lengths[:, None]
        tt = np.broadcast_to(topics[:, None], nodes.shape)[mask]
        np.add.at(counts, (tt, nodes[mask]), 1)
    return counts


@njit(cache=True)
def _has_edge(indptr, indices, u, v):
    lo = indptr[u]
    hi = indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        x = indices[mid]
        if x == v:
            return True
        if x < v:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True, inline="always")
def _step(indptr, indices, prev, curr, u, inv_p, inv_q):
    """CSR position of the next hop from ``curr`` (``prev < 0`` on the first step), or -1 at a dead end."""
    lo = indptr[curr]
    hi = indptr[curr + 1]
    if hi == lo:
        return -1
    total = 0.0
    for j in range(lo, hi):
        v = indices[j]
        if prev < 0:
            total += 1.0
        elif v == prev:
            total += inv_p
        elif _has_edge(indptr, indices, prev, v):
            total += 1.0
        else:
            total += inv_q
    target = u * total
    acc = 0.0
    for j in range(lo, hi):
        v = indices[j]
        if prev < 0:
            acc += 1.0
        elif v == prev:
            acc += inv_p
        elif _has_edge(indptr, indices, prev, v):
            acc += 1.0
        else:
            acc += inv_q
        if target < acc:
            return j
    return hi - 1


@njit(cache=True)
def _walk_one(indptr, indices, vsigns, start, draws, inv_p, inv_q, out_nodes, out_signs):
    out_nodes[0] = start
    length = 1
    prev = -1
    curr = start
    for step in range(draws.shape[0]):
        chosen = _step(indptr, indices, prev, curr, draws[step], inv_p, inv_q)
        if chosen < 0:
            break
        out_signs[length - 1] = vsigns[chosen]
        prev = curr
        curr = indices[chosen]
        out_nodes[length] = curr
        length += 1
    return length


@njit(cache=True)
def _next_nodes(indptr, indices, prev, curr, draws, inv_p, inv_q):
    out = np.empty(draws.shape[0], dtype=np.int64)
    for i in range(draws.shape[0]):
        out[i] = indices[_step(indptr, indices, prev, curr, draws[i], inv_p, inv_q)]
    return out


def sample_next(
    view: TopicSubgraphView, prev: int | None, curr: int, p: float, q: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """``n`` independent next hops from state ``(prev, curr)`` using the compiled walk step."""
    if view.degree(curr) == 0:
        raise DeadEndError(f"node {curr} has no neighbours in topic {view.topic}")
    if prev is not None and not view.has_edge(prev, curr):
        raise ValueError(f"({prev}, {curr}) is not an edge of topic {view.topic}")
    draws = rng.random(n)
    return _next_nodes(view.indptr, view.indices, -1 if prev is None else prev, curr, draws, 1.0 / p, 1.0 / q)


@njit(cache=True)
def _walk_topic(indptr, indices, vsigns, starts, draws, inv_p, inv_q, out_nodes, out_signs, out_len):
    r = draws.shape[1]
    for s in range(starts.shape[0]):
        for w in range(r):
            row = s * r + w
            out_len[row] = _walk_one(
                indptr, indices, vsigns, starts[s], draws[s, w], inv_p, inv_q, out_nodes[row], out_signs[row]
            )


@njit(cache=True, parallel=True)
def _walk_topic_parallel(indptr, indices, vsigns, starts, draws, inv_p, inv_q, out_nodes, out_signs, out_len):
    r = draws.shape[1]
    for s in prange(starts.shape[0]):
        for w in range(r):
            row = s * r + w
            out_len[row] = _walk_one(
                indptr, indices, vsigns, starts[s], draws[s, w], inv_p, inv_q, out_nodes[row], out_signs[row]
            )


def generate_corpus(
    g: SignedTopicGraph,
    cfg: WalkConfig,
    symmetrize: bool = True,
    threads: int = 1,
    engine: str = "compiled",
) -> WalkCorpus:
    """Run ``cfg.walks_per_node`` walks from every node of every topic graph.

    ``engine="python"`` uses :func:`sample_walk` step by step and is the
    reference for the compiled path; both draw from the same per-start
    streams and return identical corpora.
    """
    if engine not in ("compiled", "python"):
        raise ValueError(f"unknown engine {engine!r}")
    if not g.is_aggregated:
        raise ValueError("generate_corpus requires an aggregated graph")
    r, l = cfg.walks_per_node, cfg.walk_length
    views = topic_subgraphs(g, symmetrize)
    node_blocks, sign_blocks, len_blocks, topic_blocks = [], [], [], []
    for view in views:
        starts = np.array(view.nodes, dtype=np.int64)
        n_rows = len(starts) * r
        nodes = np.full((n_rows, l), -1, dtype=np.int64)
        signs = np.zeros((n_rows, l - 1), dtype=np.int8)
        lengths = np.zeros(n_rows, dtype=np.int64)
        if engine == "python":
            row = 0
            for s in starts:
                rng = start_rng(cfg.seed, view.topic, int(s))
                for _ in range(r):
                    walk = sample_walk(view, int(s), cfg, rng)
                    nodes[row, : len(walk)] = walk.nodes
                    for m in range(len(walk) - 1):
                        signs[row, m] = view.sign(walk.nodes[m], walk.nodes[m + 1])
                    lengths[row] = len(walk)
                    row += 1
        elif n_rows:
            draws = np.empty((len(starts), r, l - 1))
            for i, s in enumerate(starts):
                draws[i] = start_rng(cfg.seed, view.topic, int(s)).random((r, l - 1))
            kernel = _walk_topic_parallel if threads > 1 else _walk_topic
            kernel(
                view.indptr, view.indices, view.signs, starts, draws,
                1.0 / cfg.p, 1.0 / cfg.q, nodes, signs, lengths,
            )
        node_blocks.append(nodes)
        sign_blocks.append(signs)
        len_blocks.append(lengths)
        topic_blocks.append(np.full(n_rows, view.topic, dtype=np.int64))

    if node_blocks:
        nodes = np.concatenate(node_blocks)
        signs = np.concatenate(sign_blocks)
        lengths = np.concatenate(len_blocks)
        topics = np.concatenate(topic_blocks)
    else:
        nodes = np.zeros((0, l), dtype=np.int64)
        signs = np.zeros((0, l - 1), dtype=np.int8)
        lengths = np.zeros(0, dtype=np.int64)
        topics = np.zeros(0, dtype=np.int64)
    counts = _count_tokens(nodes, lengths, topics, g.n_topics, g.n_nodes)
    return WalkCorpus(nodes, signs, lengths, topics, counts, symmetrize)


def write_corpus(corpus: WalkCorpus, g: SignedTopicGraph, stream: TextIO) -> None:
    """Diagnostic dump: ``topic<TAB>n0 n1 ...`` per walk, external ids."""
    for walk in corpus:
        names = " ".join(g.node_names[v] for v in walk.nodes)
        stream.write(f"{g.topic_names[walk.topic]}\t{names}\n")
