import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stance_embed.edges import EdgeOp, edge_feature, edge_matrix, phi, phi_grad_second, write_features
from stance_embed.graph import Edge
from stance_embed.sgns import EmbeddingStore

E1, E2 = [1.0, -2.0, 3.0], [0.5, 0.5, -1.0]


@pytest.mark.parametrize(
    "op,expected",
    [
        ("hadamard", [0.5, -1.0, -3.0]),
        ("l1", [0.5, 2.5, 4.0]),
        ("l2", [0.25, 6.25, 16.0]),
        ("average", [0.75, -0.75, 1.0]),
        ("concatenation", [1.0, -2.0, 3.0, 0.5, 0.5, -1.0]),
    ],
)
def test_phi_examples(op, expected):
    assert phi(op, E1, E2).tolist() == expected


def test_concat_alias():
    assert EdgeOp.parse("concat") is EdgeOp.CONCATENATION
    assert EdgeOp.parse("l2") is EdgeOp.L2
    with pytest.raises(ValueError):
        EdgeOp.parse("cosine")


def test_phi_rejects_mismatched_dims():
    with pytest.raises(ValueError):
        phi("hadamard", [1.0, 2.0], [1.0])


vectors = arrays(np.float64, 6, elements=st.floats(-100, 100))


@settings(max_examples=80, deadline=None)
@given(vectors, vectors)
def test_phi_properties(a, b):
    for op in (EdgeOp.HADAMARD, EdgeOp.L1, EdgeOp.L2, EdgeOp.AVERAGE):
        np.testing.assert_array_equal(phi(op, a, b), phi(op, b, a))
    assert not phi("l1", a, a).any()
    assert not phi("l2", a, a).any()
    cat = phi("concatenation", a, b)
    np.testing.assert_array_equal(cat[:6], a)
    np.testing.assert_array_equal(cat[6:], b)
    np.testing.assert_allclose(np.sqrt(phi("l2", a, b)), phi("l1", a, b), rtol=1e-12, atol=1e-100)


ints = arrays(np.float64, 5, elements=st.integers(-1000, 1000).map(float))


@settings(max_examples=100, deadline=None)
@given(ints, ints, ints)
def test_shared_topic_cancels_for_distance_ops(u, v, t):
    # the same topic vector added to both endpoints drops out of l1 and l2
    for op in ("l1", "l2"):
        np.testing.assert_array_equal(phi(op, u + t, v + t), phi(op, u, v))


def test_small_worked_examples():
    assert phi("average", [0, 2], [2, 0]).tolist() == [1, 1]
    assert phi("l2", [1, 3], [1, 1]).tolist() == [0, 4]
    assert len(phi("concatenation", [1, 2], [3, 4])) == 4


def test_phi_rowwise_matches_loop():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    for op in EdgeOp:
        rows = phi(op, a, b)
        for i in range(5):
            np.testing.assert_array_equal(rows[i], phi(op, a[i], b[i]))


@pytest.mark.parametrize("op", list(EdgeOp))
def test_phi_grad_second_finite_difference(op):
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=4), rng.normal(size=4)
    up = rng.normal(size=8 if op is EdgeOp.CONCATENATION else 4)
    grad = phi_grad_second(op, a, b, up)
    eps = 1e-6
    for c in range(4):
        bp, bm = b.copy(), b.copy()
        bp[c] += eps
        bm[c] -= eps
        fd = (up @ phi(op, a, bp) - up @ phi(op, a, bm)) / (2 * eps)
        assert grad[c] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def _store(topics=True):
    nodes = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    table = np.array([[10.0, 20.0], [2.0, 3.0]]) if topics else None
    return EmbeddingStore(nodes, np.zeros((6, 2)), table, ("a", "b", "c"), ("T0", "T1"), "addition")


def test_topic_enters_target_only():
    store = _store()
    e = Edge(0, 1, 1, 1)
    assert edge_feature(store, e, "mask", "concatenation").vector.tolist() == [1, 2, 3, -1]
    assert edge_feature(store, e, "addition", "concatenation").vector.tolist() == [1, 2, 5, 2]
    assert edge_feature(store, e, "hadamard", "concatenation").vector.tolist() == [1, 2, 6, -3]
    assert edge_feature(store, e, None, "hadamard").vector.tolist() == [3, -2]


def test_mask_is_topic_free():
    store = _store()
    for op in EdgeOp:
        np.testing.assert_array_equal(
            edge_matrix(store, [0, 2], [1, 0], [1, 0], "mask", op), edge_matrix(store, [0, 2], [1, 0], [1, 0], None, op)
        )


def test_addition_into_target_then_l1():
    store = EmbeddingStore(
        np.array([[1.0, 1.0], [0.0, 0.0]]), np.zeros((4, 2)), np.array([[1.0, 1.0]]), ("a", "b"), ("T",), "addition"
    )
    assert edge_feature(store, Edge(0, 1, 1, 0), "addition", "l1").vector.tolist() == [0.0, 0.0]


def test_edge_feature_carries_metadata():
    f = edge_feature(_store(), Edge(2, 0, -1, 0), "addition", "average")
    assert f.label == -1 and f.topic == 0 and f.endpoints == (2, 0)
    assert f.vector.tolist() == [5.75, 11.25]


def test_edge_matrix_matches_single_features():
    store = _store()
    edges = [Edge(0, 1, 1, 0), Edge(1, 2, -1, 1), Edge(2, 0, 1, 1)]
    for op in EdgeOp:
        mat = edge_matrix(store, [e.source for e in edges], [e.target for e in edges], [e.topic for e in edges], "hadamard", op)
        for row, e in zip(mat, edges):
            np.testing.assert_array_equal(row, edge_feature(store, e, "hadamard", op).vector)


def test_unknown_endpoints_and_topics():
    with pytest.raises(KeyError):
        edge_feature(_store(), Edge(0, 7, 1, 0), "mask", "l1")
    with pytest.raises(KeyError):
        edge_feature(_store(), Edge(0, 1, 1, 5), "addition", "l1")
    with pytest.raises(KeyError):
        edge_feature(_store(topics=False), Edge(0, 1, 1, 0), "addition", "l1")
    # mask never looks at the topic
    edge_feature(_store(topics=False), Edge(0, 1, 1, 5), "mask", "l1")


def test_write_features():
    store = _store()
    e = Edge(0, 1, -1, 1)
    buf = io.StringIO()
    write_features(buf, [e], [edge_feature(store, e, "mask", "hadamard").vector], store.node_names, store.topic_names)
    assert buf.getvalue() == "a\tb\tT1\t-1\t3.0,-2.0\n"
