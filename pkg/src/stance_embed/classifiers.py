"""Link-sign classifiers over edge features: brute-force kNN and SGD logistic regression."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import expit

from .edges import EdgeFeature, EdgeOp, phi, phi_grad_second
from .sgns import CombineMode

# ----------------------------------------------------------------- kNN


def knn_score(train: Sequence[EdgeFeature], query: EdgeFeature, k: int) -> float:
    """Fraction of the ``k`` nearest training features (Euclidean) labelled positive.

    Equal distances are ordered by position in ``train``.
    """
    if not train:
        raise ValueError("empty training set")
    if not 1 <= k <= len(train):
        raise ValueError(f"k={k} outside 1..{len(train)}")
    dists = [float(np.sqrt(((f.vector - query.vector) ** 2).sum())) for f in train]
    order = sorted(range(len(train)), key=lambda i: (dists[i], i))
    return sum(train[i].label > 0 for i in order[:k]) / k


def knn_scores(
    train_x: np.ndarray, train_labels, query_x: np.ndarray, k: int, chunk: int = 512, slack: int = 16
) -> np.ndarray:
    """Vectorised :func:`knn_score` for many queries.

    Candidates come from single-precision expanded-norm distances and are
    re-ranked with exact distances. A row falls back to a full exact scan
    whenever rounding could have hidden a closer point.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    query_x = np.asarray(query_x, dtype=np.float64)
    pos = np.asarray(train_labels) > 0
    n = len(train_x)
    if n == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    m = min(n, k + slack)
    train32 = train_x.astype(np.float32)
    sq_train = (train_x**2).sum(axis=1)
    # forward error bound of the float32 expanded form, with headroom
    err_scale = 8.0 * (train_x.shape[1] + 2) * float(np.finfo(np.float32).eps)
    max_sq_train = sq_train.max()
    sq_train32 = sq_train.astype(np.float32)
    out = np.empty(len(query_x))
    for lo in range(0, len(query_x), chunk):
        q = query_x[lo : lo + chunk]
        if m < n:
            sq_q = (q**2).sum(axis=1)
            approx = q.astype(np.float32) @ train32.T
            approx *= -2.0
            approx += sq_train32[None, :]
            approx += sq_q.astype(np.float32)[:, None]
            cand, boundary = _smallest(approx, m)
        else:
            cand = np.broadcast_to(np.arange(n), (len(q), n))
        exact = ((train_x[cand] - q[:, None, :]) ** 2).sum(axis=2)
        order = np.lexsort((cand, exact), axis=-1)[:, :k]
        nearest = np.take_along_axis(cand, order, axis=1)
        scores = pos[nearest].mean(axis=1)
        if m < n:
            kth = np.take_along_axis(exact, order[:, -1:], axis=1)[:, 0]
            tol = err_scale * (sq_q + max_sq_train) + 1e-300
            unsure = kth >= boundary - tol
            for r in np.flatnonzero(unsure):
                full = ((train_x - q[r]) ** 2).sum(axis=1)
                scores[r] = pos[np.lexsort((np.arange(n), full))[:k]].mean()
        out[lo : lo + len(q)] = scores
    return out


@njit(cache=True)
def _smallest(values, m):
    """Column indices of the ``m`` smallest entries per row (unordered) and each row's largest kept value."""
    rows, cols = values.shape
    idx = np.empty((rows, m), dtype=np.int64)
    top = np.empty(rows)
    kept = np.empty(m, dtype=values.dtype)
    for r in range(rows):
        worst = 0
        for j in range(m):
            kept[j] = values[r, j]
            idx[r, j] = j
            if kept[j] > kept[worst]:
                worst = j
        for c in range(m, cols):
            v = values[r, c]
            if v < kept[worst]:
                kept[worst] = v
                idx[r, worst] = c
                for j in range(m):
                    if kept[j] > kept[worst]:
                        worst = j
        top[r] = kept[worst]
    return idx, top


# ----------------------------------------------------------------- logistic regression

_SIGMA_CODES = {None: 0, CombineMode.MASK: 0, CombineMode.ADDITION: 1, CombineMode.HADAMARD: 2}
_PHI_CODES = {EdgeOp.HADAMARD: 0, EdgeOp.L1: 1, EdgeOp.L2: 2, EdgeOp.AVERAGE: 3, EdgeOp.CONCATENATION: 4}


@dataclass(frozen=True)
class LRConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    seed: int = 0


@dataclass
class LRModel:
    weights: np.ndarray
    bias: float
    phi_op: EdgeOp | None = None
    sigma_mode: CombineMode | None = None
    topic_table: np.ndarray | None = None

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(x))

    def edge_scores(self, src_emb: np.ndarray, dst_emb: np.ndarray, topics: np.ndarray) -> np.ndarray:
        """Scores for raw endpoint embeddings, folding this model's topic table into the target."""
        return self.predict_proba(_learned_features(self, src_emb, dst_emb, topics))


def _learned_features(model: LRModel, src, dst, topics):
    if model.sigma_mode not in (None, CombineMode.MASK):
        t = model.topic_table[np.asarray(topics, dtype=np.int64)]
        dst = t + dst if model.sigma_mode is CombineMode.ADDITION else t * dst
    return phi(model.phi_op, src, dst)


def train_logistic(features: np.ndarray, labels, cfg: LRConfig = LRConfig()) -> LRModel:
    """Per-sample SGD on the logistic loss over precomputed features (frozen or no topics)."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = (np.asarray(labels) > 0).astype(np.float64)
    w = np.zeros(x.shape[1])
    b = np.zeros(1)
    _lr_sgd(x, y, w, b, cfg.learning_rate, cfg.epochs, cfg.seed & 0xFFFFFFFF)
    return LRModel(w, float(b[0]))


def train_logistic_learned_topics(
    src_emb: np.ndarray,
    dst_emb: np.ndarray,
    topics: np.ndarray,
    labels,
    n_topics: int,
    sigma_mode: CombineMode | str,
    op: EdgeOp | str,
    cfg: LRConfig = LRConfig(),
) -> LRModel:
    """Logistic regression that learns its own topic table jointly with the weights.

    Features are ``phi(src, sigma(T[topic], dst))`` with ``T`` optimised by the
    same SGD steps as the weights; for topic-agnostic embeddings.
    """
    mode = CombineMode(sigma_mode)
    op = EdgeOp(op)
    d = src_emb.shape[1]
    rng = np.random.default_rng(cfg.seed)
    table = (rng.random((n_topics, d)) - 0.5) / d
    if mode is CombineMode.HADAMARD:
        table += 1.0
    width = 2 * d if op is EdgeOp.CONCATENATION else d
    w = np.zeros(width)
    b = np.zeros(1)
    y = (np.asarray(labels) > 0).astype(np.float64)
    _lr_topic_sgd(
        np.ascontiguousarray(src_emb, dtype=np.float64),
        np.ascontiguousarray(dst_emb, dtype=np.float64),
        np.asarray(topics, dtype=np.int64), y, table, w, b,
        _SIGMA_CODES[mode], _PHI_CODES[op], cfg.learning_rate, cfg.epochs, cfg.seed & 0xFFFFFFFF,
    )
    return LRModel(w, float(b[0]), op, mode, table)


def logistic_topic_loss_and_grads(w, b, table, src, dst, topics, labels, sigma_mode, op):
    """Summed logistic loss of the learned-topic model and its gradients ``(loss, dw, db, dtable)``."""
    mode = CombineMode(sigma_mode)
    model = LRModel(w, b, EdgeOp(op), mode, table)
    feats = _learned_features(model, src, dst, topics)
    z = feats @ w + b
    y = (np.asarray(labels) > 0).astype(np.float64)
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z))
    g = expit(z) - y
    dw = feats.T @ g
    db = float(g.sum())
    dtable = np.zeros_like(table)
    if mode is not CombineMode.MASK:
        t = table[np.asarray(topics, dtype=np.int64)]
        x2 = t + dst if mode is CombineMode.ADDITION else t * dst
        upstream = g[:, None] * w[None, :]
        dx2 = phi_grad_second(op, src, x2, upstream)
        dt = dx2 if mode is CombineMode.ADDITION else dx2 * dst
        np.add.at(dtable, np.asarray(topics, dtype=np.int64), dt)
    return loss, dw, db, dtable


@njit(cache=True, inline="always")
def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _shuffle(order):
    for i in range(order.shape[0] - 1, 0, -1):
        j = int(np.random.random() * (i + 1))
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp


@njit(cache=True)
def _lr_sgd(x, y, w, b, lr, epochs, seed):
    np.random.seed(seed)
    n, d = x.shape
    order = np.arange(n)
    for _ in range(epochs):
        _shuffle(order)
        for i in order:
            z = b[0]
            for c in range(d):
                z += w[c] * x[i, c]
            g = _sigmoid(z) - y[i]
            for c in range(d):
                w[c] -= lr * g * x[i, c]
            b[0] -= lr * g


@njit(cache=True)
def _lr_topic_sgd(src, dst, topics, y, table, w, b, sigma, op, lr, epochs, seed):
    np.random.seed(seed)
    n, d = src.shape
    width = w.shape[0]
    order = np.arange(n)
    x2 = np.empty(d)
    f = np.empty(width)
    for _ in range(epochs):
        _shuffle(order)
        for i in order:
            t = topics[i]
            for c in range(d):
                if sigma == 0:
                    x2[c] = dst[i, c]
                elif sigma == 1:
                    x2[c] = table[t, c] + dst[i, c]
                else:
                    x2[c] = table[t, c] * dst[i, c]
            for c in range(d):
                a = src[i, c]
                if op == 0:
                    f[c] = a * x2[c]
                elif op == 1:
                    f[c] = abs(a - x2[c])
                elif op == 2:
                    f[c] = (a - x2[c]) ** 2
                elif op == 3:
                    f[c] = 0.5 * (a + x2[c])
                else:
                    f[c] = a
                    f[d + c] = x2[c]
            z = b[0]
            for c in range(width):
                z += w[c] * f[c]
            g = _sigmoid(z) - y[i]
            if sigma != 0:
                for c in range(d):
                    a = src[i, c]
                    if op == 0:
                        dx = g * w[c] * a
                    elif op == 1:
                        diff = x2[c] - a
                        dx = g * w[c] * ((diff > 0) - (diff < 0))
                    elif op == 2:
                        dx = g * w[c] * 2.0 * (x2[c] - a)
                    elif op == 3:
                        dx = 0.5 * g * w[c]
                    else:
                        dx = g * w[d + c]
                    if sigma == 1:
                        table[t, c] -= lr * dx
                    else:
                        table[t, c] -= lr * dx * dst[i, c]
            for c in range(width):
                w[c] -= lr * g * f[c]
            b[0] -= lr * g
