import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stance_embed.classifiers import (
    LRConfig,
    knn_score,
    knn_scores,
    logistic_topic_loss_and_grads,
    train_logistic,
    train_logistic_learned_topics,
)
from stance_embed.edges import EdgeFeature, EdgeOp
from stance_embed.metrics import auc, auc_pairwise
from stance_embed.sgns import CombineMode


# ---------------------------------------------------------------- AUC


@pytest.mark.parametrize(
    "scores,labels,expected",
    [
        ([0.9, 0.8, 0.3, 0.1], [1, 1, -1, -1], 1.0),
        ([0.1, 0.2, 0.8, 0.9], [1, 1, -1, -1], 0.0),
        ([0.5, 0.5, 0.5, 0.5], [1, -1, 1, -1], 0.5),
        ([0.9, 0.4, 0.6, 0.1], [1, 1, -1, -1], 0.75),
        ([0.7, 0.7, 0.2], [1, -1, -1], 0.75),
    ],
)
def test_auc_examples(scores, labels, expected):
    assert auc(scores, labels) == pytest.approx(expected, abs=1e-12)
    assert auc_pairwise(scores, labels) == pytest.approx(expected, abs=1e-12)


def test_auc_needs_both_classes():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1])


label_lists = st.lists(st.sampled_from([1, -1]), min_size=2, max_size=40).filter(lambda l: 1 in l and -1 in l)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_auc_properties(data):
    labels = np.array(data.draw(label_lists))
    scores = np.array(data.draw(st.lists(st.integers(0, 5), min_size=len(labels), max_size=len(labels))), dtype=float)
    a = auc(scores, labels)
    assert 0.0 <= a <= 1.0
    assert a == pytest.approx(auc_pairwise(scores, labels), abs=1e-12)
    assert auc(-scores, labels) == pytest.approx(1.0 - a, abs=1e-12)
    assert auc(3.0 * scores + 7.0, labels) == pytest.approx(a, abs=1e-12)


# ---------------------------------------------------------------- kNN


def _features(x, y):
    return [EdgeFeature(v, int(l), 0, (0, 1)) for v, l in zip(x, y)]


def test_knn_small_example():
    train = _features(np.array([[0.0], [1.0], [2.0], [10.0]]), [1, 1, -1, -1])
    q = EdgeFeature(np.array([0.4]), 1, 0, (0, 1))
    assert knn_score(train, q, 1) == 1.0
    assert knn_score(train, q, 3) == pytest.approx(2 / 3)
    assert knn_score(train, q, 4) == 0.5


def test_knn_exact_match_and_split_vote():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    train = _features(x, [1, -1, -1])
    assert knn_score(train, EdgeFeature(np.zeros(2), -1, 0, (0, 1)), 1) == 1.0
    assert knn_score(train, EdgeFeature(np.array([0.4, 0.4]), -1, 0, (0, 1)), 2) == 0.5


def test_knn_ties_broken_by_position():
    train = _features(np.array([[1.0], [-1.0]]), [-1, 1])
    q = EdgeFeature(np.array([0.0]), 1, 0, (0, 1))
    assert knn_score(train, q, 1) == 0.0
    assert knn_scores(np.array([[1.0], [-1.0]]), [-1, 1], np.array([[0.0]]), 1).tolist() == [0.0]


def test_knn_validation():
    with pytest.raises(ValueError):
        knn_score([], EdgeFeature(np.zeros(1), 1, 0, (0, 1)), 1)
    with pytest.raises(ValueError):
        knn_scores(np.zeros((3, 2)), [1, 1, -1], np.zeros((1, 2)), 4)


@pytest.mark.parametrize("seed,discrete", [(0, False), (1, False), (2, True), (3, True)])
def test_knn_vectorised_matches_brute_force(seed, discrete):
    rng = np.random.default_rng(seed)
    if discrete:
        # many exact distance ties
        x, q = rng.integers(0, 3, size=(120, 3)).astype(float), rng.integers(0, 3, size=(40, 3)).astype(float)
    else:
        x, q = rng.normal(size=(120, 5)), rng.normal(size=(40, 5))
    y = rng.choice([-1, 1], size=120)
    train = _features(x, y)
    for k in (1, 5, 10):
        fast = knn_scores(x, y, q, k, chunk=16, slack=2)
        slow = [knn_score(train, EdgeFeature(v, 1, 0, (0, 1)), k) for v in q]
        np.testing.assert_array_equal(fast, slow)


def test_knn_exact_when_rounding_dominates():
    # huge offsets swamp single-precision distances; rows must fall back to exact scans
    rng = np.random.default_rng(9)
    x = rng.normal(size=(200, 4)) * 1e-3 + 1e4
    q = rng.normal(size=(30, 4)) * 1e-3 + 1e4
    y = rng.choice([-1, 1], size=200)
    train = _features(x, y)
    fast = knn_scores(x, y, q, 5, slack=3)
    slow = [knn_score(train, EdgeFeature(v, 1, 0, (0, 1)), 5) for v in q]
    np.testing.assert_array_equal(fast, slow)


# ---------------------------------------------------------------- logistic regression


def test_logistic_separable():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 3))
    margin = x @ np.array([2.0, -1.0, 0.5])
    keep = np.abs(margin) > 0.3
    x, y = x[keep], np.where(margin[keep] > 0, 1, -1)
    model = train_logistic(x, y, LRConfig(epochs=200))
    acc = ((model.predict_proba(x) > 0.5) == (y > 0)).mean()
    assert acc == 1.0


def test_logistic_deterministic():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(50, 2)), rng.choice([-1, 1], 50)
    a, b = train_logistic(x, y), train_logistic(x, y)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def _topic_problem(seed=0, n=30, d=3, n_topics=2):
    rng = np.random.default_rng(seed)
    return (
        rng.normal(size=(n, d)),
        rng.normal(size=(n, d)),
        rng.integers(0, n_topics, n),
        rng.choice([-1, 1], n),
        rng.normal(size=(n_topics, d)),
    )


@pytest.mark.parametrize("mode", ["addition", "hadamard"])
@pytest.mark.parametrize("op", list(EdgeOp))
def test_learned_topic_gradients(mode, op):
    src, dst, topics, y, table = _topic_problem()
    rng = np.random.default_rng(5)
    w = rng.normal(size=6 if op is EdgeOp.CONCATENATION else 3)
    b = 0.3
    _, dw, db, dtable = logistic_topic_loss_and_grads(w, b, table, src, dst, topics, y, mode, op)
    eps = 1e-6

    def loss(w_=w, b_=b, t_=table):
        return logistic_topic_loss_and_grads(w_, b_, t_, src, dst, topics, y, mode, op)[0]

    for c in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[c] += eps
        wm[c] -= eps
        assert dw[c] == pytest.approx((loss(w_=wp) - loss(w_=wm)) / (2 * eps), rel=1e-4, abs=1e-6)
    assert db == pytest.approx((loss(b_=b + eps) - loss(b_=b - eps)) / (2 * eps), rel=1e-4)
    for idx in np.ndindex(table.shape):
        tp, tm = table.copy(), table.copy()
        tp[idx] += eps
        tm[idx] -= eps
        fd = (loss(t_=tp) - loss(t_=tm)) / (2 * eps)
        assert dtable[idx] == pytest.approx(fd, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("mode", ["addition", "hadamard"])
@pytest.mark.parametrize("op", list(EdgeOp))
def test_learned_topic_kernel_step_matches_gradients(mode, op):
    # one sample, one epoch: the compiled update is exactly one gradient step
    src, dst, topics, y, _ = _topic_problem(n=1)
    cfg = LRConfig(learning_rate=0.1, epochs=1, seed=4)
    model = train_logistic_learned_topics(src, dst, topics, y, 2, mode, op, cfg)
    rng = np.random.default_rng(cfg.seed)
    table0 = (rng.random((2, 3)) - 0.5) / 3 + (1.0 if mode == "hadamard" else 0.0)
    w0 = np.zeros(6 if op is EdgeOp.CONCATENATION else 3)
    _, dw, db, dtable = logistic_topic_loss_and_grads(w0, 0.0, table0, src, dst, topics, y, mode, op)
    np.testing.assert_allclose(model.weights, w0 - 0.1 * dw, atol=1e-12)
    assert model.bias == pytest.approx(-0.1 * db, abs=1e-12)
    np.testing.assert_allclose(model.topic_table, table0 - 0.1 * dtable, atol=1e-12)


def test_learned_topics_fit_topic_dependent_labels():
    # the label flips with the topic; only a topic-aware model can fit it
    rng = np.random.default_rng(3)
    n, d = 400, 4
    src, dst = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    topics = rng.integers(0, 2, n)
    base = (src * dst).sum(axis=1) > 0
    y = np.where(base ^ (topics == 1), 1, -1)
    model = train_logistic_learned_topics(src, dst, topics, y, 2, CombineMode.HADAMARD, EdgeOp.HADAMARD, LRConfig(epochs=100))
    assert auc(model.edge_scores(src, dst, topics), y) > 0.9
    plain = train_logistic(src * dst, y, LRConfig(epochs=100))
    assert auc(plain.predict_proba(src * dst), y) < 0.7
