"""Sign-informed skip-gram contexts from walks.

The sign attached to a context is the product of the edge signs along the
walk between source and context: a friend of a friend is a friend, a friend
of an enemy is an enemy, an enemy of an enemy is a friend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import TopicSubgraphView
from .walks import Walk, WalkCorpus


@dataclass(frozen=True)
class ContextConfig:
    window: int = 5

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass
class TrainingExample:
    source: int
    topic: int
    contexts: list[tuple[int, int]] = field(default_factory=list)


def inferred_sign(view: TopicSubgraphView, walk: Walk, center: int, offset: int) -> int:
    """Product of edge signs on the walk segment between ``center`` and ``center + offset``.

    Edges are always read in walk order (``w[m-1] -> w[m]``), for contexts
    before and after the source alike.
    """
    if offset == 0:
        raise ValueError("offset must be nonzero")
    other = center + offset
    if not (0 <= center < len(walk.nodes) and 0 <= other < len(walk.nodes)):
        raise IndexError("segment outside the walk")
    lo, hi = min(center, other), max(center, other)
    sign = 1
    for m in range(lo + 1, hi + 1):
        u, v = walk.nodes[m - 1], walk.nodes[m]
        try:
            sign *= view.sign(u, v)
        except KeyError:
            raise ValueError(f"walk step {u}->{v} is not an edge of topic {view.topic}") from None
    return sign


def prefix_signs(step_signs: np.ndarray) -> np.ndarray:
    """``P[i]`` = product of the first ``i`` step signs; ``S(i, j) = P[i] * P[j]``."""
    out = np.ones(len(step_signs) + 1, dtype=np.int64)
    if len(step_signs):
        out[1:] = np.cumprod(step_signs.astype(np.int64))
    return out


def build_examples(view: TopicSubgraphView, walk: Walk, cfg: ContextConfig) -> list[TrainingExample]:
    """One example per walk position, with up to ``window`` contexts on each side."""
    n = len(walk.nodes)
    if n < 2:
        return []
    steps = np.array([view.sign(walk.nodes[m], walk.nodes[m + 1]) for m in range(n - 1)])
    prefix = prefix_signs(steps)
    k = cfg.window
    examples = []
    for i, src in enumerate(walk.nodes):
        ctx = [
            (walk.nodes[j], int(prefix[i] * prefix[j]))
            for j in range(max(0, i - k), min(n, i + k + 1))
            if j != i
        ]
        examples.append(TrainingExample(src, walk.topic, ctx))
    return examples


def context_row(node: int, sign: int) -> int:
    """Row of the ``(node, sign)`` context in the context table."""
    return 2 * node + (0 if sign > 0 else 1)


def pairs_per_walk(lengths: np.ndarray, window: int) -> np.ndarray:
    """Number of (source, context) pairs each walk yields."""
    lengths = np.asarray(lengths, dtype=np.int64)
    offsets = np.arange(1, window + 1, dtype=np.int64)
    return 2 * np.maximum(lengths[:, None] - offsets[None, :], 0).sum(axis=1)


def context_counts(corpus: WalkCorpus, n_nodes: int, n_topics: int, window: int) -> np.ndarray:
    """``counts[t, row]``: occurrences of each context row as a context in topic ``t``."""
    counts = np.zeros((n_topics, 2 * n_nodes), dtype=np.int64)
    if not len(corpus):
        return counts
    nodes = corpus.nodes
    n_walks, width = nodes.shape
    prefix = np.ones((n_walks, width), dtype=np.int64)
    if width > 1:
        prefix[:, 1:] = np.cumprod(corpus.signs.astype(np.int64), axis=1)
    topics = np.broadcast_to(corpus.topics[:, None], nodes.shape)
    pos = np.arange(width)
    for off in range(1, min(window, width - 1) + 1):
        valid = (pos[None, : width - off] + off) < corpus.lengths[:, None]
        sign = prefix[:, : width - off] * prefix[:, off:]
        left, right = nodes[:, : width - off], nodes[:, off:]
        tt = topics[:, : width - off][valid]
        s = sign[valid]
        # each pair at distance `off` is a context in both directions
        for ctx in (left[valid], right[valid]):
            rows = 2 * ctx + (s < 0)
            np.add.at(counts, (tt, rows), 1)
    return counts
