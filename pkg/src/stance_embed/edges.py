"""Edge feature vectors built from node (and optionally topic) embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, TextIO

import numpy as np

from .graph import Edge
from .sgns import CombineMode, EmbeddingStore


class EdgeOp(str, Enum):
    HADAMARD = "hadamard"
    L1 = "l1"
    L2 = "l2"
    AVERAGE = "average"
    CONCATENATION = "concatenation"

    @classmethod
    def parse(cls, name: str) -> EdgeOp:
        return cls.CONCATENATION if name == "concat" else cls(name)


@dataclass(frozen=True)
class EdgeFeature:
    vector: np.ndarray
    label: int
    topic: int
    endpoints: tuple[int, int]


def phi(op: EdgeOp | str, e1, e2) -> np.ndarray:
    """Combine two embeddings (or two row-aligned matrices) into edge features."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise ValueError(f"dimension mismatch: {e1.shape} vs {e2.shape}")
    op = EdgeOp(op)
    if op is EdgeOp.HADAMARD:
        return e1 * e2
    if op is EdgeOp.L1:
        return np.abs(e1 - e2)
    if op is EdgeOp.L2:
        return (e1 - e2) ** 2
    if op is EdgeOp.AVERAGE:
        return 0.5 * (e1 + e2)
    return np.concatenate([e1, e2], axis=-1)


def phi_grad_second(op: EdgeOp | str, e1: np.ndarray, e2: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Back-propagate ``upstream`` (d loss / d feature) to the second argument of :func:`phi`."""
    op = EdgeOp(op)
    if op is EdgeOp.HADAMARD:
        return upstream * e1
    if op is EdgeOp.L1:
        return upstream * np.sign(e2 - e1)
    if op is EdgeOp.L2:
        return upstream * 2.0 * (e2 - e1)
    if op is EdgeOp.AVERAGE:
        return 0.5 * upstream
    return upstream[..., e1.shape[-1] :]


def _sigma_rows(mode: CombineMode, topics: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    if mode is CombineMode.MASK:
        return nodes
    if mode is CombineMode.ADDITION:
        return topics + nodes
    return topics * nodes


def edge_matrix(
    store: EmbeddingStore,
    sources: np.ndarray,
    targets: np.ndarray,
    topics: np.ndarray,
    sigma_mode: CombineMode | str | None,
    op: EdgeOp | str,
    topic_table: np.ndarray | None = None,
) -> np.ndarray:
    """Row-wise features ``phi(W_u[src], sigma(W_t[topic], W_u[dst]))``.

    The topic only ever enters through the target endpoint. ``sigma_mode=None``
    (or mask) leaves topics out entirely. ``topic_table`` overrides the store's
    topic table (used by classifiers that learn their own).
    """
    src = store.node_table[np.asarray(sources, dtype=np.int64)]
    dst = store.node_table[np.asarray(targets, dtype=np.int64)]
    mode = CombineMode.MASK if sigma_mode is None else CombineMode(sigma_mode)
    if mode is not CombineMode.MASK:
        table = store.topic_table if topic_table is None else topic_table
        if table is None:
            raise ValueError("store has no topic table")
        dst = _sigma_rows(mode, table[np.asarray(topics, dtype=np.int64)], dst)
    return phi(op, src, dst)


def edge_feature(
    store: EmbeddingStore, edge: Edge, sigma_mode: CombineMode | str | None, op: EdgeOp | str
) -> EdgeFeature:
    n_nodes = store.node_table.shape[0]
    if not (0 <= edge.source < n_nodes and 0 <= edge.target < n_nodes):
        raise KeyError(f"edge endpoints {edge.source}->{edge.target} not in store")
    mode = None if sigma_mode is None else CombineMode(sigma_mode)
    if mode not in (None, CombineMode.MASK):
        if store.topic_table is None or not 0 <= edge.topic < store.topic_table.shape[0]:
            raise KeyError(f"topic {edge.topic} not in store")
    vec = edge_matrix(store, [edge.source], [edge.target], [edge.topic], mode, op)[0]
    return EdgeFeature(vec, edge.sign, edge.topic, (edge.source, edge.target))


def write_features(
    stream: TextIO,
    edges: Sequence[Edge],
    features: np.ndarray,
    node_names: Sequence[str],
    topic_names: Sequence[str],
) -> None:
    """``src<TAB>dst<TAB>topic<TAB>label<TAB>v1,...,vd`` per edge."""
    for e, vec in zip(edges, features):
        values = ",".join(repr(float(x)) for x in vec)
        label = "+1" if e.sign > 0 else "-1"
        stream.write(
            f"{node_names[e.source]}\t{node_names[e.target]}\t{topic_names[e.topic]}\t{label}\t{values}\n"
        )
