"""Seeded polarized signed topic graphs with known communities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .graph import Edge, SignedTopicGraph


@dataclass(frozen=True)
class SyntheticConfig:
    """Two-community signed topic graph.

    ``topic_groups`` partitions topic indices; by default ``n_groups``
    contiguous blocks. With ``intergroup_flip`` every topic group gets its
    own independent community split, otherwise all groups share one split.
    """

    n_nodes: int = 1000
    n_topics: int = 20
    edges_per_topic: int = 2000
    sign_noise: float = 0.05
    intergroup_flip: bool = False
    n_groups: int = 4
    topic_groups: tuple[tuple[int, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 4:
            raise ValueError("n_nodes must be >= 4")
        if not 0 <= self.sign_noise < 0.5:
            raise ValueError("sign_noise must be in [0, 0.5)")
        if self.n_topics < 1 or self.edges_per_topic < 0:
            raise ValueError("need at least one topic and a non-negative edge count")
        groups = self.groups()
        flat = sorted(t for grp in groups for t in grp)
        if flat != list(range(self.n_topics)):
            raise ValueError("topic_groups must partition range(n_topics)")

    def groups(self) -> tuple[tuple[int, ...], ...]:
        if self.topic_groups is not None:
            return tuple(tuple(g) for g in self.topic_groups)
        n_groups = max(1, min(self.n_groups, self.n_topics))
        return tuple(tuple(int(t) for t in blk) for blk in np.array_split(np.arange(self.n_topics), n_groups))


def generate(cfg: SyntheticConfig) -> tuple[SignedTopicGraph, np.ndarray]:
    """Sample a graph and its ground truth.

    Returns the (non-aggregated) graph and ``communities[node, group]`` in
    {0, 1}. Endpoints are uniform over distinct node pairs; an edge is
    positive inside a community and negative across, then flipped with
    probability ``sign_noise``.
    """
    rng = np.random.default_rng(cfg.seed)
    groups = cfg.groups()
    if cfg.intergroup_flip:
        communities = rng.integers(0, 2, size=(cfg.n_nodes, len(groups)))
    else:
        shared = rng.integers(0, 2, size=cfg.n_nodes)
        communities = np.repeat(shared[:, None], len(groups), axis=1)
    group_of = np.empty(cfg.n_topics, dtype=np.int64)
    for gi, grp in enumerate(groups):
        group_of[list(grp)] = gi

    edges = []
    for t in range(cfg.n_topics):
        m = cfg.edges_per_topic
        src = rng.integers(0, cfg.n_nodes, size=m)
        dst = rng.integers(0, cfg.n_nodes, size=m)
        clash = src == dst
        while clash.any():
            dst[clash] = rng.integers(0, cfg.n_nodes, size=int(clash.sum()))
            clash = src == dst
        comm = communities[:, group_of[t]]
        signs = np.where(comm[src] == comm[dst], 1, -1)
        flips = rng.random(m) < cfg.sign_noise
        signs = np.where(flips, -signs, signs)
        edges.extend(Edge(int(u), int(v), int(s), t) for u, v, s in zip(src, dst, signs))

    width = len(str(cfg.n_nodes - 1))
    node_names = [f"u{i:0{width}d}" for i in range(cfg.n_nodes)]
    twidth = len(str(cfg.n_topics - 1))
    topic_names = [f"T{t:0{twidth}d}" for t in range(cfg.n_topics)]
    return SignedTopicGraph(edges, node_names, topic_names), communities


def write_ground_truth(
    stream: TextIO, communities: np.ndarray, node_names: Sequence[str], group_names: Sequence[str] | None = None
) -> None:
    """``node<TAB>topic_group<TAB>community`` per (node, group)."""
    n_groups = communities.shape[1]
    group_names = group_names or [f"G{g}" for g in range(n_groups)]
    for v, name in enumerate(node_names):
        for gi in range(n_groups):
            stream.write(f"{name}\t{group_names[gi]}\t{int(communities[v, gi])}\n")
