"""Signed, directed, topic-attributed multigraphs.

Nodes and topics are interned to dense integers on load; the original string
ids only live in the name tables and are used again when writing files.
"""

from __future__ import annotations

import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

_SIGN_TOKENS = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    sign: int
    topic: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"edge sign must be +1 or -1, got {self.sign!r}")
        if self.source == self.target:
            raise ValueError(f"self-loop on node {self.source}")


class SignedTopicGraph:
    """Immutable multigraph of ``(source, target, sign, topic)`` edges.

    ``node_names[i]`` / ``topic_names[j]`` hold the external ids of node ``i``
    and topic ``j``. Nodes without edges may be registered (e.g. nodes whose
    only edges fell into a held-out fold).
    """

    def __init__(
        self,
        edges: Iterable[Edge],
        node_names: Sequence[str],
        topic_names: Sequence[str],
    ):
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.node_names: tuple[str, ...] = tuple(node_names)
        self.topic_names: tuple[str, ...] = tuple(topic_names)
        n, t = len(self.node_names), len(self.topic_names)
        for e in self.edges:
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise ValueError(f"edge {e} references an unregistered node")
            if not 0 <= e.topic < t:
                raise ValueError(f"edge {e} references an unregistered topic")
        self._aggregated: bool | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    @property
    def n_topics(self) -> int:
        return len(self.topic_names)

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    @property
    def topics(self) -> range:
        return range(self.n_topics)

    def __len__(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, SignedTopicGraph):
            return NotImplemented
        return (
            self.node_names == other.node_names
            and self.topic_names == other.topic_names
            and self.edges == other.edges
        )

    def __repr__(self):
        return (
            f"SignedTopicGraph(nodes={self.n_nodes}, topics={self.n_topics}, "
            f"edges={len(self.edges)})"
        )

    @property
    def is_aggregated(self) -> bool:
        if self._aggregated is None:
            keys = {(e.source, e.target, e.topic) for e in self.edges}
            self._aggregated = len(keys) == len(self.edges)
        return self._aggregated

    def with_edges(self, edges: Iterable[Edge]) -> SignedTopicGraph:
        """Same node/topic tables, different edge set (used for CV folds)."""
        return SignedTopicGraph(edges, self.node_names, self.topic_names)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Columns ``(source, target, sign, topic)`` as int64 arrays."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy(), empty.copy()
        arr = np.array(
            [(e.source, e.target, e.sign, e.topic) for e in self.edges], dtype=np.int64
        )
        return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def _parse_sign(token: str) -> int:
    try:
        return _SIGN_TOKENS[token.strip()]
    except KeyError:
        raise GraphFormatError(f"sign must be one of +,-,+1,-1,1; got {token!r}") from None


def load_edge_list(stream: TextIO | Iterable[str]) -> SignedTopicGraph:
    """Parse ``source<TAB>target<TAB>sign<TAB>topic`` lines.

    Blank lines and lines starting with ``#`` are skipped. Parallel edges are
    kept; see :func:`aggregate_parallel_edges`.
    """
    node_ids: dict[str, int] = {}
    topic_ids: dict[str, int] = {}
    edges = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise GraphFormatError(f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}")
        src, dst, sign_tok, topic = fields
        if not src or not dst or not topic:
            raise GraphFormatError(f"line {lineno}: empty field")
        try:
            sign = _parse_sign(sign_tok)
        except GraphFormatError as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
        if src == dst:
            raise GraphFormatError(f"line {lineno}: self-loop on node {src!r}")
        u = node_ids.setdefault(src, len(node_ids))
        v = node_ids.setdefault(dst, len(node_ids))
        t = topic_ids.setdefault(topic, len(topic_ids))
        edges.append(Edge(u, v, sign, t))
    return SignedTopicGraph(edges, list(node_ids), list(topic_ids))


def read_edge_list(path) -> SignedTopicGraph:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return load_edge_list(fh)


def loads_edge_list(text: str) -> SignedTopicGraph:
    return load_edge_list(io.StringIO(text))


def write_edge_list(g: SignedTopicGraph, stream: TextIO) -> None:
    for e in g.edges:
        sign = "+1" if e.sign > 0 else "-1"
        stream.write(
            f"{g.node_names[e.source]}\t{g.node_names[e.target]}\t{sign}\t{g.topic_names[e.topic]}\n"
        )


def aggregate_parallel_edges(g: SignedTopicGraph) -> SignedTopicGraph:
    """Merge parallel edges per ``(source, target, topic)``.

    The merged sign is +1 when the summed signs are positive and -1 otherwise,
    so ties collapse to -1. Output order follows first occurrence.
    """
    totals: dict[tuple[int, int, int], int] = {}
    for e in g.edges:
        key = (e.source, e.target, e.topic)
        totals[key] = totals.get(key, 0) + e.sign
    out = g.with_edges(Edge(s, d, 1 if total > 0 else -1, t) for (s, d, t), total in totals.items())
    out._aggregated = True
    return out


class TopicSubgraphView:
    """Adjacency of one topic's edges, stored as CSR over global node ids.

    ``indices[indptr[u]:indptr[u + 1]]`` are the (sorted, unique) walk
    neighbours of ``u`` and ``signs`` the matching edge signs. With
    ``undirected`` set, every edge is walkable in both directions; if both
    ``u->v`` and ``v->u`` exist, the pair's sign is the sign of the edge in
    the direction being looked up.
    """

    def __init__(self, topic: int, n_nodes: int, pairs: dict[tuple[int, int], int], undirected: bool):
        self.topic = topic
        self.undirected = undirected
        self.n_nodes = n_nodes
        adj: dict[int, dict[int, int]] = defaultdict(dict)
        for (u, v), s in pairs.items():
            adj[u][v] = s
        if undirected:
            for (u, v), s in pairs.items():
                adj[v].setdefault(u, s)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        for u, nbrs in adj.items():
            indptr[u + 1] = len(nbrs)
        np.cumsum(indptr, out=indptr)
        indices = np.empty(indptr[-1], dtype=np.int64)
        signs = np.empty(indptr[-1], dtype=np.int8)
        for u, nbrs in adj.items():
            order = sorted(nbrs)
            lo = indptr[u]
            indices[lo : lo + len(order)] = order
            signs[lo : lo + len(order)] = [nbrs[v] for v in order]
        self.indptr = indptr
        self.indices = indices
        self.signs = signs
        self._adj = {u: dict(sorted(nbrs.items())) for u, nbrs in adj.items()}
        self.edge_pairs = dict(pairs)

    @property
    def nodes(self) -> list[int]:
        """Nodes of the topic graph, i.e. nodes with at least one edge."""
        present = set(self._adj)
        for nbrs in self._adj.values():
            present.update(nbrs)
        return sorted(present)

    def neighbors(self, u: int) -> list[tuple[int, int]]:
        return list(self._adj.get(u, {}).items())

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def sign(self, u: int, v: int) -> int:
        try:
            return self._adj[u][v]
        except KeyError:
            raise KeyError(f"no edge {u}->{v} in topic {self.topic} view") from None

    def __len__(self) -> int:
        return len(self.edge_pairs)


def topic_subgraph(g: SignedTopicGraph, t: int, symmetrize: bool = True) -> TopicSubgraphView:
    if not 0 <= t < g.n_topics:
        raise KeyError(f"unknown topic {t}")
    if not g.is_aggregated:
        raise ValueError("topic_subgraph requires an aggregated graph")
    pairs = {(e.source, e.target): e.sign for e in g.edges if e.topic == t}
    return TopicSubgraphView(t, g.n_nodes, pairs, symmetrize)


def topic_subgraphs(g: SignedTopicGraph, symmetrize: bool = True) -> list[TopicSubgraphView]:
    """All topic views in one pass over the edges."""
    if not g.is_aggregated:
        raise ValueError("topic_subgraphs requires an aggregated graph")
    per_topic: list[dict[tuple[int, int], int]] = [{} for _ in g.topics]
    for e in g.edges:
        per_topic[e.topic][(e.source, e.target)] = e.sign
    return [TopicSubgraphView(t, g.n_nodes, pairs, symmetrize) for t, pairs in enumerate(per_topic)]
